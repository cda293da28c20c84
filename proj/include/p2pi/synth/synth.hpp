#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "p2pi/common/json_util.hpp"
#include "p2pi/core/series.hpp"
#include "p2pi/core/types.hpp"
#include "p2pi/ingest/ingest.hpp"

namespace p2pi::synth {

struct Vec2 {
  double x = 0;  // lateral, foot-lengths, 0 at the foot axis
  double y = 0;  // longitudinal, 0 at the heel, 1 at the toe
};

/// Pressure-cell positions for one foot in normalized foot coordinates. The
/// right foot uses the same positions mirrored across the foot axis.
class TaxelLayout {
 public:
  /// 7 rows x 5 columns shaped to a foot outline (narrow heel, wide
  /// forefoot). Positions are illustrative, not anatomical; swap in a real
  /// layout via from_csv.
  static TaxelLayout standard();

  const std::array<Vec2, core::kPressureChannels>& positions() const { return pos_; }
  void validate() const;

  std::string to_csv() const;  // taxel,x,y rows
  static TaxelLayout from_csv(const std::string& text);

 private:
  std::array<Vec2, core::kPressureChannels> pos_{};
};

/// Instantaneous foot loading: per-foot fractions of body weight (stored
/// separately so mirroring swaps them without re-rounding; they must sum to
/// 1) and each foot's center of pressure in its own foot frame.
struct FootLoad {
  double left_fraction = 0.5;
  double right_fraction = 0.5;
  Vec2 cop_left{0.0, 0.45};
  Vec2 cop_right{0.0, 0.45};
};

/// Parametric whole-body motion: a periodic pose trajectory plus the matching
/// weight-shift profile. `amplitude` scales all joint excursions (0 freezes
/// the pose), `sway_mm` adds slow random postural drift at generation time.
struct MotionTemplate {
  core::TaskLabel task = core::TaskLabel::Free;
  double period_s = 4.0;
  double amplitude = 1.0;
  double sway_mm = 5.0;

  static MotionTemplate for_task(core::TaskLabel task);
  /// Quiet standing: all excursions zero; only sway moves the joints.
  static MotionTemplate quiet_stand();

  /// Mirrored template: weight shift and lateral motion swap sides.
  MotionTemplate mirrored() const;

  FootLoad load_at(double phase) const;

  bool mirror = false;
};

/// Fixed bone lengths (mm) of the generated 21-joint skeleton.
struct BoneLengths {
  double hip_half = 100, femur = 400, shank = 400, foot = 150;
  double hips_ab = 150, ab_chest = 200, chest_neck = 200, neck_head = 150;
  double shoulder_half = 180, upper_arm = 280, forearm = 250, hand = 80;
  double ankle_height = 100;
};

/// One pose of the rigid skeleton at a given motion phase (no sway).
std::array<core::Vec3, core::kJointCount> pose_at(const MotionTemplate& tmpl,
                                                  double phase);

/// Rigid-skeleton trajectory sampled at `rate`; timestamps are
/// t0 + i/rate and the motion phase follows absolute time, so streams
/// generated with different rates/offsets describe the same movement.
core::SkeletonSeries generate_skeleton(const MotionTemplate& tmpl, double duration_s,
                                       double rate_hz, std::uint64_t seed,
                                       double t0 = 0.0);

struct PressurePair {
  std::array<double, core::kPressureChannels> left{};
  std::array<double, core::kPressureChannels> right{};
};

/// Distributes body weight over the taxels: per foot, an isotropic Gaussian
/// (sigma 0.15 foot-lengths) around the center of pressure, normalized so the
/// per-foot sum equals that foot's share exactly. Newtons in, newtons out.
PressurePair pressure_forward(const FootLoad& load, double body_weight_n,
                              const TaxelLayout& layout);

/// Ankle-mounted IMU simulation from a skeleton trajectory: accelerometer =
/// second difference of the Foot joint plus gravity, gyro = angular velocity
/// of the shank segment (rad/s). Output series has channels gx,gy,gz,ax,ay,az.
core::Series imu_forward(const core::SkeletonSeries& skeleton, core::FootSide side,
                         double noise_std = 0.0, std::uint64_t seed = 0);

/// Saturating pressure -> sensor voltage map: full_scale_n newtons drives the
/// sensor to its maximum (supply / gain) volts.
double pressure_to_voltage(double pressure_n, double full_scale_n,
                           const ingest::AmplifierParams& params);

/// Voltage quantized to ADC counts, clamped to [0, 2^bits - 1]; inverse of
/// ingest::adc_to_sensor_voltage up to half an LSB.
int voltage_to_adc(double pressure_n, double full_scale_n,
                   const ingest::AmplifierParams& params);

struct NoiseConfig {
  double pressure = 0.02;  // multiplicative, relative
  double imu = 0.05;       // additive, m/s^2 and rad/s
  double mocap_mm = 0.5;   // additive jitter on written coordinates
  double sway_mm = 5.0;    // postural drift amplitude

  json to_json() const;
  static NoiseConfig from_json(const json& j);
};

struct SynthConfig {
  std::vector<core::TaskLabel> tasks;  // empty = the eight recorded movements
  double duration_s = 12.0;            // per task
  std::uint64_t seed = 0;
  double sensor_rate_hz = 100.0;
  double mocap_rate_hz = 120.0;
  double insole_offset_s = 0.002;
  double mocap_offset_s = 0.004;
  double dropout_prob = 0.01;  // chance of an empty CSV cell
  double body_weight_n = 700.0;
  double taxel_full_scale_n = 300.0;
  NoiseConfig noise;
  ingest::AmplifierParams amplifier;

  std::vector<core::TaskLabel> task_list() const;  // tasks or the default mix
  void validate() const;
  json to_json() const;
  static SynthConfig from_json(const json& j);
};

struct RecordingFiles {
  core::TaskLabel task = core::TaskLabel::Unknown;
  std::string left;   // file names relative to the dataset directory
  std::string right;
  std::string mocap;
  std::string imu;
  std::size_t insole_rows = 0;
  std::size_t mocap_rows = 0;
};

struct SynthManifest {
  std::uint64_t seed = 0;
  json config;  // full SynthConfig echo
  std::string layout_file;
  std::vector<RecordingFiles> recordings;
  std::vector<std::pair<std::string, std::string>> hashes;  // file -> fnv1a64 hex

  json to_json() const;
  static SynthManifest from_json(const json& j);
};

/// Writes the full CSV dataset (per task: left/right insole, mocap, imu),
/// the taxel layout and manifest.json; byte-identical for identical configs.
SynthManifest emit_dataset(const SynthConfig& cfg, const std::filesystem::path& dir);

SynthManifest load_manifest(const std::filesystem::path& path);

}  // namespace p2pi::synth
