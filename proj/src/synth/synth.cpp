#include "p2pi/synth/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "p2pi/common/csv.hpp"
#include "p2pi/common/error.hpp"
#include "p2pi/common/hash.hpp"
#include "p2pi/numerics/rng.hpp"

namespace p2pi::synth {

namespace fs = std::filesystem;
using core::JointId;
using core::TaskLabel;
using core::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kGravity = 9.81;       // m/s^2, added to the vertical accel channel
constexpr double kKernelSigma = 0.15;   // pressure kernel width, foot-lengths
constexpr double kMillimeter = 1e-3;    // skeleton coordinates are mm, IMU wants m

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

// ---------------------------------------------------------------------------
// Taxel layout

TaxelLayout TaxelLayout::standard() {
  // 7 rows heel to toe, 5 columns each, shaped by per-row half-width and a
  // slight lateral shift that follows the foot axis.
  constexpr double row_y[7] = {0.08, 0.22, 0.36, 0.50, 0.64, 0.78, 0.92};
  constexpr double half_w[7] = {0.10, 0.12, 0.13, 0.14, 0.16, 0.17, 0.14};
  constexpr double center[7] = {0.00, 0.01, 0.02, 0.03, 0.02, 0.00, -0.03};
  TaxelLayout layout;
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 5; ++c) {
      layout.pos_[r * 5 + c] = {center[r] + half_w[r] * (c - 2) / 2.0, row_y[r]};
    }
  }
  layout.validate();
  return layout;
}

void TaxelLayout::validate() const {
  for (const Vec2& p : pos_) {
    if (!(p.x >= -0.5 && p.x <= 0.5) || !(p.y >= 0.0 && p.y <= 1.0)) {
      throw DataError("taxel position outside the foot outline");
    }
  }
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    for (std::size_t j = i + 1; j < pos_.size(); ++j) {
      const double dx = pos_[i].x - pos_[j].x;
      const double dy = pos_[i].y - pos_[j].y;
      if (dx * dx + dy * dy <= 1e-12) {
        throw DataError("taxel positions must be pairwise distinct");
      }
    }
  }
}

std::string TaxelLayout::to_csv() const {
  std::string out = "taxel,x,y\n";
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(pos_[i].x);
    out += ',';
    out += format_double(pos_[i].y);
    out += '\n';
  }
  return out;
}

TaxelLayout TaxelLayout::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "taxel,x,y") {
    throw FormatError("taxel layout: expected header taxel,x,y");
  }
  TaxelLayout layout;
  std::array<bool, core::kPressureChannels> seen{};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw FormatError("taxel layout: expected 3 columns");
    int idx = -1;
    const auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), idx);
    if (ec != std::errc() || ptr != cells[0].data() + cells[0].size() || idx < 0 ||
        idx >= core::kPressureChannels) {
      throw FormatError("taxel layout: bad taxel index");
    }
    if (seen[idx]) throw FormatError("taxel layout: duplicate taxel index");
    double x = 0, y = 0;
    if (!parse_cell(cells[1], x) || !parse_cell(cells[2], y) || std::isnan(x) || std::isnan(y)) {
      throw FormatError("taxel layout: bad coordinate");
    }
    layout.pos_[idx] = {x, y};
    seen[idx] = true;
  }
  for (bool s : seen) {
    if (!s) throw FormatError("taxel layout: expected 35 taxels");
  }
  layout.validate();
  return layout;
}

// ---------------------------------------------------------------------------
// Motion templates

namespace {

// Joint-space pose parameters, all angles in radians. The skeleton is built
// from these by forward kinematics; bone lengths never enter here, so rigidity
// holds by construction.
struct PoseParams {
  double root_dx = 0, root_dy = 0;  // mm
  double pitch = 0, roll = 0;       // trunk lean forward / to the right
  double hip_l = 0, hip_r = 0;      // hip flexion
  double knee_l = 0, knee_r = 0;    // knee flexion
  double swing_l = 0, swing_r = 0;  // arm swing forward
  double raise_l = 0, raise_r = 0;  // arm abduction
};

struct Blend {
  PoseParams pose;
  FootLoad load;
};

double bump(double phase) { return (1.0 - std::cos(kTwoPi * phase)) * 0.5; }

double half_sine_sq(double s) {
  const double h = std::max(0.0, s);
  return h * h;
}

// All excursions scale linearly with the template amplitude so that
// amplitude 0 freezes the neutral stance exactly.
Blend eval_template(const MotionTemplate& tmpl, double phase) {
  const double a = tmpl.amplitude;
  const double s2 = std::sin(kTwoPi * phase);
  const double b = bump(phase);
  Blend out;
  PoseParams& p = out.pose;
  FootLoad& load = out.load;
  // The complement is taken once here; mirroring later swaps the two stored
  // fractions, which keeps the mirror property exact to the last bit.
  auto set_left = [&load](double f) {
    load.left_fraction = f;
    load.right_fraction = 1.0 - f;
  };
  switch (tmpl.task) {
    case TaskLabel::TiltLeftRight: {
      p.roll = 0.3 * a * s2;
      p.root_dx = 30.0 * a * s2;
      set_left(clamp01(0.5 - 0.45 * a * s2));
      load.cop_left.x = load.cop_right.x = 0.08 * a * s2;
      break;
    }
    case TaskLabel::Bow: {
      p.pitch = 0.9 * a * b;
      p.root_dy = -60.0 * a * b;
      p.swing_l = p.swing_r = 0.2 * a * b;
      load.cop_left.y = load.cop_right.y = 0.45 + 0.22 * a * b;
      break;
    }
    case TaskLabel::Squat: {
      const double bend = 0.9 * a * b;
      p.hip_l = p.hip_r = bend;
      p.knee_l = p.knee_r = 2.0 * bend;
      p.pitch = 0.35 * a * b;
      p.swing_l = p.swing_r = 0.6 * a * b;
      load.cop_left.y = load.cop_right.y = 0.45 - 0.12 * a * b;
      break;
    }
    case TaskLabel::StandAndSit: {
      const double bend = 1.25 * a * b;
      p.hip_l = p.hip_r = bend;
      p.knee_l = p.knee_r = 2.0 * bend;
      p.pitch = 0.55 * a * b;
      p.root_dy = -40.0 * a * b;
      p.swing_l = p.swing_r = 0.5 * a * b;
      load.cop_left.y = load.cop_right.y = 0.45 - 0.16 * a * b;
      break;
    }
    case TaskLabel::OneLegStand: {
      const double w = clamp01(0.5 + 1.2 * a * s2);
      set_left(w);
      const double lift_r = clamp01(2.0 * (w - 0.5));  // right leg unloads
      const double lift_l = clamp01(2.0 * (0.5 - w));
      p.hip_r = 0.9 * lift_r;
      p.knee_r = 1.4 * lift_r;
      p.hip_l = 0.9 * lift_l;
      p.knee_l = 1.4 * lift_l;
      p.root_dx = -25.0 * a * s2;  // shift over the stance foot
      break;
    }
    case TaskLabel::Walk: {
      const double sw = std::sin(kTwoPi * phase + 0.6);
      p.hip_l = 0.5 * a * s2;
      p.hip_r = -0.5 * a * s2;
      p.knee_l = 0.7 * a * half_sine_sq(sw);
      p.knee_r = 0.7 * a * half_sine_sq(std::sin(kTwoPi * phase + kPi + 0.6));
      p.swing_l = -0.35 * a * s2;
      p.swing_r = 0.35 * a * s2;
      set_left(clamp01(0.5 - 0.55 * a * sw));
      load.cop_left.y = load.cop_right.y = 0.45 + 0.2 * a * std::sin(2.0 * kTwoPi * phase);
      p.root_dy = 12.0 * a * std::sin(2.0 * kTwoPi * phase);
      break;
    }
    case TaskLabel::Jump: {
      // Countermovement without a flight phase: both feet stay loaded.
      const double bend = 1.0 * a * half_sine_sq(s2);
      p.hip_l = p.hip_r = bend;
      p.knee_l = p.knee_r = 2.0 * bend;
      p.raise_l = p.raise_r = 1.1 * a * half_sine_sq(std::sin(kTwoPi * phase + 0.5));
      load.cop_left.y = load.cop_right.y =
          0.45 - 0.12 * a * half_sine_sq(s2) + 0.18 * a * half_sine_sq(-s2);
      break;
    }
    case TaskLabel::OneLegHop: {
      set_left(1.0);  // single support throughout
      p.hip_r = 0.8 * a;
      p.knee_r = 1.5 * a;
      const double pulse = a * half_sine_sq(s2);
      p.hip_l = 0.7 * pulse;
      p.knee_l = 1.4 * pulse;
      load.cop_left.y = 0.45 + 0.12 * a * s2;
      p.root_dx = -20.0 * a;
      break;
    }
    case TaskLabel::Free: {
      p.pitch = 0.25 * a * bump(2.0 * phase);
      p.roll = 0.15 * a * std::sin(3.0 * kTwoPi * phase + 1.0);
      const double bend = 0.3 * a * b;
      p.hip_l = p.hip_r = bend;
      p.knee_l = p.knee_r = 2.0 * bend;
      p.swing_l = 0.3 * a * std::sin(5.0 * kTwoPi * phase);
      p.swing_r = -p.swing_l;
      set_left(clamp01(0.5 + 0.3 * a * std::sin(3.0 * kTwoPi * phase)));
      load.cop_left.y = load.cop_right.y = 0.45 + 0.1 * a * std::sin(2.0 * kTwoPi * phase);
      break;
    }
    case TaskLabel::Unknown:
      throw ParameterError("motion template has no task");
  }
  if (tmpl.mirror) {
    std::swap(p.hip_l, p.hip_r);
    std::swap(p.knee_l, p.knee_r);
    std::swap(p.swing_l, p.swing_r);
    std::swap(p.raise_l, p.raise_r);
    p.roll = -p.roll;
    p.root_dx = -p.root_dx;
    const FootLoad base = load;
    load.left_fraction = base.right_fraction;
    load.right_fraction = base.left_fraction;
    load.cop_left = {-base.cop_right.x, base.cop_right.y};
    load.cop_right = {-base.cop_left.x, base.cop_left.y};
  }
  return out;
}

}  // namespace

MotionTemplate MotionTemplate::for_task(TaskLabel task) {
  if (task == TaskLabel::Unknown) throw ParameterError("motion template has no task");
  MotionTemplate t;
  t.task = task;
  switch (task) {
    case TaskLabel::TiltLeftRight:
    case TaskLabel::Bow:
    case TaskLabel::Squat:
      t.period_s = 4.0;
      break;
    case TaskLabel::StandAndSit:
      t.period_s = 6.0;
      break;
    case TaskLabel::OneLegStand:
      t.period_s = 8.0;
      break;
    case TaskLabel::Walk:
      t.period_s = 1.2;
      break;
    case TaskLabel::Jump:
      t.period_s = 2.0;
      break;
    case TaskLabel::OneLegHop:
      t.period_s = 1.5;
      break;
    case TaskLabel::Free:
      t.period_s = 10.0;
      break;
    default:
      break;
  }
  return t;
}

MotionTemplate MotionTemplate::quiet_stand() {
  MotionTemplate t;
  t.task = TaskLabel::Free;
  t.period_s = 4.0;
  t.amplitude = 0.0;
  return t;
}

MotionTemplate MotionTemplate::mirrored() const {
  MotionTemplate t = *this;
  t.mirror = !t.mirror;
  return t;
}

FootLoad MotionTemplate::load_at(double phase) const {
  return eval_template(*this, phase).load;
}

// ---------------------------------------------------------------------------
// Forward kinematics

namespace {

// Axes: x lateral (+right), y forward, z up; millimeters. The root height is
// chosen so the most extended leg's ankle sits at ankle_height, i.e. the
// stance foot stays on the floor while a flexed leg lifts.
std::array<Vec3, core::kJointCount> fk(const PoseParams& p, const BoneLengths& bones) {
  const double ext_l = bones.femur * std::cos(p.hip_l) + bones.shank * std::cos(p.knee_l - p.hip_l);
  const double ext_r = bones.femur * std::cos(p.hip_r) + bones.shank * std::cos(p.knee_r - p.hip_r);
  const Vec3 hips{p.root_dx, p.root_dy, bones.ankle_height + std::max(ext_l, ext_r)};

  const double ct = std::cos(p.pitch), st = std::sin(p.pitch);
  const double cr = std::cos(p.roll), sr = std::sin(p.roll);
  const Vec3 up{ct * sr, st, ct * cr};         // trunk axis
  const Vec3 lateral{cr, 0.0, -sr};            // shoulder axis, +x side

  std::array<Vec3, core::kJointCount> j{};
  auto set = [&](JointId id, const Vec3& v) { j[static_cast<int>(id)] = v; };

  set(JointId::Hips, hips);
  const Vec3 ab = hips + up * bones.hips_ab;
  const Vec3 chest = ab + up * bones.ab_chest;
  const Vec3 neck = chest + up * bones.chest_neck;
  set(JointId::Ab, ab);
  set(JointId::Chest, chest);
  set(JointId::Neck, neck);
  set(JointId::Head, neck + up * bones.neck_head);

  auto arm_dir = [&](double swing, double abduct) {
    // Straight arm hanging from the shoulder, swung forward then abducted.
    const double cs = std::cos(p.pitch + swing), ss = std::sin(p.pitch + swing);
    const double phi = p.roll + abduct;
    return Vec3{-cs * std::sin(phi), ss, -cs * std::cos(phi)};
  };
  const Vec3 lsh = chest - lateral * bones.shoulder_half;
  const Vec3 rsh = chest + lateral * bones.shoulder_half;
  const Vec3 la = arm_dir(p.swing_l, p.raise_l);
  const Vec3 ra = arm_dir(p.swing_r, -p.raise_r);
  set(JointId::LShoulder, lsh);
  set(JointId::LUArm, lsh + la * bones.upper_arm);
  set(JointId::LFArm, lsh + la * (bones.upper_arm + bones.forearm));
  set(JointId::LHand, lsh + la * (bones.upper_arm + bones.forearm + bones.hand));
  set(JointId::RShoulder, rsh);
  set(JointId::RUArm, rsh + ra * bones.upper_arm);
  set(JointId::RFArm, rsh + ra * (bones.upper_arm + bones.forearm));
  set(JointId::RHand, rsh + ra * (bones.upper_arm + bones.forearm + bones.hand));

  auto leg = [&](double side, double hip, double knee, JointId thigh_id, JointId shin_id,
                 JointId foot_id, JointId toe_id) {
    const Vec3 thigh = hips + Vec3{side * bones.hip_half, 0.0, 0.0};
    const Vec3 femur_dir{0.0, std::sin(hip), -std::cos(hip)};
    const Vec3 knee_pt = thigh + femur_dir * bones.femur;
    const double shin_angle = hip - knee;
    const Vec3 shank_dir{0.0, std::sin(shin_angle), -std::cos(shin_angle)};
    const Vec3 ankle = knee_pt + shank_dir * bones.shank;
    set(thigh_id, thigh);
    set(shin_id, knee_pt);
    set(foot_id, ankle);
    set(toe_id, ankle + Vec3{0.0, bones.foot, 0.0});
  };
  leg(-1.0, p.hip_l, p.knee_l, JointId::LThigh, JointId::LShin, JointId::LFoot, JointId::LToe);
  leg(+1.0, p.hip_r, p.knee_r, JointId::RThigh, JointId::RShin, JointId::RFoot, JointId::RToe);
  return j;
}

}  // namespace

std::array<Vec3, core::kJointCount> pose_at(const MotionTemplate& tmpl, double phase) {
  return fk(eval_template(tmpl, phase).pose, BoneLengths{});
}

core::SkeletonSeries generate_skeleton(const MotionTemplate& tmpl, double duration_s,
                                       double rate_hz, std::uint64_t seed, double t0) {
  if (!(duration_s > 0) || !(rate_hz > 0)) {
    throw ParameterError("skeleton generation needs positive duration and rate");
  }
  if (!(tmpl.period_s > 0)) throw ParameterError("motion template period must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
  const BoneLengths bones;

  // Postural sway: two incommensurate slow sinusoids per horizontal axis with
  // random phases. A function of absolute time, so resampling the same seed at
  // another rate walks the same path.
  numerics::RngStream rng(seed, 0);
  std::array<double, 4> sway_phase{};
  for (double& ph : sway_phase) ph = rng.uniform(0.0, kTwoPi);

  core::SkeletonSeries out(core::kSkeletonWidth);
  out.meta.subject = "synthetic";
  out.meta.task = tmpl.task;
  out.meta.source_rate_hz = rate_hz;
  std::array<double, core::kSkeletonWidth> row{};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) / rate_hz;
    const double phase = std::fmod(t / tmpl.period_s, 1.0);
    PoseParams p = eval_template(tmpl, phase).pose;
    p.root_dx += tmpl.sway_mm * (0.6 * std::sin(kTwoPi * 0.23 * t + sway_phase[0]) +
                                 0.4 * std::sin(kTwoPi * 0.61 * t + sway_phase[1]));
    p.root_dy += tmpl.sway_mm * (0.6 * std::sin(kTwoPi * 0.19 * t + sway_phase[2]) +
                                 0.4 * std::sin(kTwoPi * 0.53 * t + sway_phase[3]));
    const auto joints = fk(p, bones);
    for (int jix = 0; jix < core::kJointCount; ++jix) {
      row[3 * jix + 0] = joints[jix].x;
      row[3 * jix + 1] = joints[jix].y;
      row[3 * jix + 2] = joints[jix].z;
    }
    out.push_back(t, row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sensor forward models

PressurePair pressure_forward(const FootLoad& load, double body_weight_n,
                              const TaxelLayout& layout) {
  if (!(load.left_fraction >= 0.0 && load.left_fraction <= 1.0) ||
      !(load.right_fraction >= 0.0 && load.right_fraction <= 1.0)) {
    throw ParameterError("load fractions must be in [0, 1]");
  }
  if (std::abs(load.left_fraction + load.right_fraction - 1.0) > 1e-9) {
    throw ParameterError("load fractions must sum to 1");
  }
  if (!(body_weight_n >= 0.0)) throw ParameterError("body weight must be >= 0");

  const auto& pos = layout.positions();
  auto fill = [&](std::array<double, core::kPressureChannels>& out, double foot_load,
                  const Vec2& cop, double x_sign) {
    if (foot_load <= 0.0) {
      out.fill(0.0);
      return;
    }
    const double inv_two_sigma_sq = 1.0 / (2.0 * kKernelSigma * kKernelSigma);
    double sum = 0.0;
    for (int i = 0; i < core::kPressureChannels; ++i) {
      const double dx = x_sign * pos[i].x - cop.x;
      const double dy = pos[i].y - cop.y;
      out[i] = std::exp(-(dx * dx + dy * dy) * inv_two_sigma_sq);
      sum += out[i];
    }
    const double scale = foot_load / sum;  // sum > 0: the kernel never vanishes
    for (double& v : out) v *= scale;
  };

  PressurePair out;
  fill(out.left, body_weight_n * load.left_fraction, load.cop_left, +1.0);
  fill(out.right, body_weight_n * load.right_fraction, load.cop_right, -1.0);
  return out;
}

core::Series imu_forward(const core::SkeletonSeries& skeleton, core::FootSide side,
                         double noise_std, std::uint64_t seed) {
  const std::size_t n = skeleton.frames();
  if (n < 3) throw DataError("imu simulation needs at least 3 frames");
  if (skeleton.width() != core::kSkeletonWidth) {
    throw ShapeError("imu simulation expects a 63-wide skeleton series");
  }
  if (noise_std < 0) throw ParameterError("imu noise level must be >= 0");
  const double dt = skeleton.time(1) - skeleton.time(0);

  const JointId foot_id = side == core::FootSide::Left ? JointId::LFoot : JointId::RFoot;
  const JointId shin_id = side == core::FootSide::Left ? JointId::LShin : JointId::RShin;
  auto joint = [&](std::size_t i, JointId id) {
    const int c = 3 * static_cast<int>(id);
    return Vec3{skeleton.at(i, c), skeleton.at(i, c + 1), skeleton.at(i, c + 2)};
  };
  auto shank_axis = [&](std::size_t i) {
    const Vec3 d = joint(i, foot_id) - joint(i, shin_id);
    const double len = d.norm();
    if (len <= 0) throw DataError("degenerate shank segment");
    return d * (1.0 / len);
  };

  // Interior rows first; the two boundary rows copy their neighbors.
  std::vector<std::array<double, 6>> rows(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Vec3 accel =
        (joint(i - 1, foot_id) + joint(i + 1, foot_id) - joint(i, foot_id) * 2.0) *
        (kMillimeter / (dt * dt));
    const Vec3 u = shank_axis(i);
    const Vec3 du = (shank_axis(i + 1) - shank_axis(i - 1)) * (1.0 / (2.0 * dt));
    const Vec3 omega = u.cross(du);
    rows[i] = {omega.x, omega.y, omega.z, accel.x, accel.y, accel.z + kGravity};
  }
  rows[0] = rows[1];
  rows[n - 1] = rows[n - 2];

  if (noise_std > 0) {
    numerics::RngStream rng(seed, 1);
    for (auto& row : rows) {
      for (double& v : row) v += noise_std * rng.normal();
    }
  }

  core::Series out(6);
  out.meta = skeleton.meta;
  for (std::size_t i = 0; i < n; ++i) out.push_back(skeleton.time(i), rows[i]);
  return out;
}

double pressure_to_voltage(double pressure_n, double full_scale_n,
                           const ingest::AmplifierParams& params) {
  params.validate();
  if (!(full_scale_n > 0)) throw ParameterError("full-scale pressure must be positive");
  const double frac = clamp01(pressure_n / full_scale_n);
  return frac * params.supply_volts / ingest::amplifier_gain(params);
}

int voltage_to_adc(double pressure_n, double full_scale_n,
                   const ingest::AmplifierParams& params) {
  params.validate();
  if (!(full_scale_n > 0)) throw ParameterError("full-scale pressure must be positive");
  const double frac = clamp01(pressure_n / full_scale_n);
  const int max_count = (1 << params.adc_bits) - 1;
  const int count = static_cast<int>(std::lround(frac * max_count));
  return std::clamp(count, 0, max_count);
}

// ---------------------------------------------------------------------------
// Configuration

json NoiseConfig::to_json() const {
  return json{{"pressure", pressure}, {"imu", imu}, {"mocap_mm", mocap_mm}, {"sway_mm", sway_mm}};
}

NoiseConfig NoiseConfig::from_json(const json& j) {
  NoiseConfig n;
  n.pressure = json_get(j, "pressure", n.pressure);
  n.imu = json_get(j, "imu", n.imu);
  n.mocap_mm = json_get(j, "mocap_mm", n.mocap_mm);
  n.sway_mm = json_get(j, "sway_mm", n.sway_mm);
  return n;
}

std::vector<TaskLabel> SynthConfig::task_list() const {
  if (!tasks.empty()) return tasks;
  std::vector<TaskLabel> all;
  for (int t = 0; t < core::kRecordedTaskCount; ++t) {
    all.push_back(static_cast<TaskLabel>(t));
  }
  return all;
}

void SynthConfig::validate() const {
  if (!(sensor_rate_hz > 0) || !(mocap_rate_hz > 0)) {
    throw ConfigError("sample rates must be positive");
  }
  if (!(duration_s >= 2.0)) throw ConfigError("duration must be at least 2 s per task");
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) {
    throw ConfigError("dropout probability must be in [0, 1)");
  }
  if (!(body_weight_n > 0)) throw ConfigError("body weight must be positive");
  if (!(taxel_full_scale_n > 0)) throw ConfigError("taxel full scale must be positive");
  if (noise.pressure < 0 || noise.imu < 0 || noise.mocap_mm < 0 || noise.sway_mm < 0) {
    throw ConfigError("noise levels must be >= 0");
  }
  for (TaskLabel t : tasks) {
    if (t == TaskLabel::Unknown) throw ConfigError("cannot synthesize the Unknown task");
  }
  amplifier.validate();
}

json SynthConfig::to_json() const {
  json task_ids = json::array();
  for (TaskLabel t : tasks) task_ids.push_back(std::string(core::task_id(t)));
  return json{{"tasks", task_ids},
              {"duration_s", duration_s},
              {"seed", seed},
              {"sensor_rate_hz", sensor_rate_hz},
              {"mocap_rate_hz", mocap_rate_hz},
              {"insole_offset_s", insole_offset_s},
              {"mocap_offset_s", mocap_offset_s},
              {"dropout_prob", dropout_prob},
              {"body_weight_n", body_weight_n},
              {"taxel_full_scale_n", taxel_full_scale_n},
              {"noise", noise.to_json()},
              {"amplifier", amplifier.to_json()}};
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  if (j.contains("tasks")) {
    for (const auto& id : j.at("tasks")) {
      c.tasks.push_back(core::task_from_id(id.get<std::string>()));
    }
  }
  c.duration_s = json_get(j, "duration_s", c.duration_s);
  c.seed = json_get(j, "seed", c.seed);
  c.sensor_rate_hz = json_get(j, "sensor_rate_hz", c.sensor_rate_hz);
  c.mocap_rate_hz = json_get(j, "mocap_rate_hz", c.mocap_rate_hz);
  c.insole_offset_s = json_get(j, "insole_offset_s", c.insole_offset_s);
  c.mocap_offset_s = json_get(j, "mocap_offset_s", c.mocap_offset_s);
  c.dropout_prob = json_get(j, "dropout_prob", c.dropout_prob);
  c.body_weight_n = json_get(j, "body_weight_n", c.body_weight_n);
  c.taxel_full_scale_n = json_get(j, "taxel_full_scale_n", c.taxel_full_scale_n);
  if (j.contains("noise")) c.noise = NoiseConfig::from_json(j.at("noise"));
  if (j.contains("amplifier")) c.amplifier = ingest::AmplifierParams::from_json(j.at("amplifier"));
  return c;
}

// ---------------------------------------------------------------------------
// Dataset emission

json SynthManifest::to_json() const {
  json recs = json::array();
  for (const RecordingFiles& r : recordings) {
    recs.push_back(json{{"task", std::string(core::task_id(r.task))},
                        {"left", r.left},
                        {"right", r.right},
                        {"mocap", r.mocap},
                        {"imu", r.imu},
                        {"insole_rows", r.insole_rows},
                        {"mocap_rows", r.mocap_rows}});
  }
  json hash_obj = json::object();
  for (const auto& [file, digest] : hashes) hash_obj[file] = digest;
  return json{{"seed", seed},
              {"config", config},
              {"layout_file", layout_file},
              {"recordings", recs},
              {"hashes", hash_obj}};
}

SynthManifest SynthManifest::from_json(const json& j) {
  SynthManifest m;
  m.seed = json_get(j, "seed", m.seed);
  if (j.contains("config")) m.config = j.at("config");
  m.layout_file = json_get(j, "layout_file", m.layout_file);
  if (!j.contains("recordings")) throw FormatError("manifest has no recordings");
  for (const auto& r : j.at("recordings")) {
    RecordingFiles rec;
    rec.task = core::task_from_id(r.at("task").get<std::string>());
    rec.left = r.at("left").get<std::string>();
    rec.right = r.at("right").get<std::string>();
    rec.mocap = r.at("mocap").get<std::string>();
    rec.imu = r.at("imu").get<std::string>();
    rec.insole_rows = json_get(r, "insole_rows", std::size_t{0});
    rec.mocap_rows = json_get(r, "mocap_rows", std::size_t{0});
    m.recordings.push_back(std::move(rec));
  }
  if (j.contains("hashes")) {
    for (const auto& [file, digest] : j.at("hashes").items()) {
      m.hashes.emplace_back(file, digest.get<std::string>());
    }
  }
  return m;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("short write to " + path.string());
}

std::string insole_header() {
  std::string h = "t";
  for (int i = 0; i < core::kPressureChannels; ++i) {
    h += ",p";
    h += static_cast<char>('0' + i / 10);
    h += static_cast<char>('0' + i % 10);
  }
  h += ",gx,gy,gz,ax,ay,az";
  return h;
}

std::string mocap_header() {
  std::string h = "t";
  for (int j = 0; j < core::kJointCount; ++j) {
    const auto name = core::joint_name(static_cast<JointId>(j));
    for (const char* axis : {".x", ".y", ".z"}) {
      h += ',';
      h += name;
      h += axis;
    }
  }
  return h;
}

// Per-recording seeds are decorrelated with a fixed odd multiplier; streams
// within a recording are split by purpose below.
std::uint64_t recording_seed(std::uint64_t base, std::size_t k) {
  return base + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(k + 1);
}

std::string build_insole_csv(const core::SkeletonSeries& skel, const core::Series& imu,
                             const MotionTemplate& tmpl, const SynthConfig& cfg,
                             const TaxelLayout& layout, core::FootSide side,
                             std::uint64_t seed_k) {
  const bool left = side == core::FootSide::Left;
  numerics::RngStream noise_rng(seed_k, left ? 3 : 4);
  numerics::RngStream drop_rng(seed_k, left ? 5 : 6);

  std::string out = insole_header();
  out += '\n';
  for (std::size_t i = 0; i < skel.frames(); ++i) {
    const double t = skel.time(i);
    const double phase = std::fmod(t / tmpl.period_s, 1.0);
    const FootLoad load = tmpl.load_at(phase);
    const PressurePair p = pressure_forward(load, cfg.body_weight_n, layout);
    const auto& taxels = left ? p.left : p.right;

    out += format_double(t);
    for (double raw : taxels) {
      out += ',';
      double v = raw;
      if (cfg.noise.pressure > 0) {
        v = std::max(0.0, v * (1.0 + cfg.noise.pressure * noise_rng.normal()));
      }
      if (cfg.dropout_prob > 0 && drop_rng.uniform() < cfg.dropout_prob) {
        continue;  // empty cell
      }
      out += std::to_string(voltage_to_adc(v, cfg.taxel_full_scale_n, cfg.amplifier));
    }
    for (int c = 0; c < 6; ++c) {
      out += ',';
      out += format_double(imu.at(i, c));
    }
    out += '\n';
  }
  return out;
}

std::string build_mocap_csv(const core::SkeletonSeries& skel, const SynthConfig& cfg,
                            std::uint64_t seed_k) {
  numerics::RngStream jitter_rng(seed_k, 7);
  numerics::RngStream drop_rng(seed_k, 8);
  std::string out = mocap_header();
  out += '\n';
  for (std::size_t i = 0; i < skel.frames(); ++i) {
    out += format_double(skel.time(i));
    for (int c = 0; c < core::kSkeletonWidth; ++c) {
      out += ',';
      double v = skel.at(i, c);
      if (cfg.noise.mocap_mm > 0) v += cfg.noise.mocap_mm * jitter_rng.normal();
      if (cfg.dropout_prob > 0 && drop_rng.uniform() < cfg.dropout_prob) {
        continue;  // empty cell, left for gap interpolation
      }
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string build_imu_csv(const core::Series& imu) {
  std::string out = "t,gx,gy,gz,ax,ay,az\n";
  for (std::size_t i = 0; i < imu.frames(); ++i) {
    out += format_double(imu.time(i));
    for (int c = 0; c < 6; ++c) {
      out += ',';
      out += format_double(imu.at(i, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace

SynthManifest emit_dataset(const SynthConfig& cfg, const fs::path& dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const TaxelLayout layout = TaxelLayout::standard();
  SynthManifest manifest;
  manifest.seed = cfg.seed;
  manifest.config = cfg.to_json();
  manifest.layout_file = "taxel_layout.csv";
  write_text(dir / manifest.layout_file, layout.to_csv());
  std::vector<std::string> files{manifest.layout_file};

  const auto task_mix = cfg.task_list();
  for (std::size_t k = 0; k < task_mix.size(); ++k) {
    const TaskLabel task = task_mix[k];
    const std::uint64_t seed_k = recording_seed(cfg.seed, k);
    MotionTemplate tmpl = MotionTemplate::for_task(task);
    tmpl.sway_mm = cfg.noise.sway_mm;

    // The same seed drives both samplings, so mocap and insole observe the
    // same continuous motion at their own rates and offsets.
    const auto mocap_skel =
        generate_skeleton(tmpl, cfg.duration_s, cfg.mocap_rate_hz, seed_k, cfg.mocap_offset_s);
    const auto sensor_skel =
        generate_skeleton(tmpl, cfg.duration_s, cfg.sensor_rate_hz, seed_k, cfg.insole_offset_s);

    const auto imu_left =
        imu_forward(sensor_skel, core::FootSide::Left, cfg.noise.imu, seed_k + 11);
    const auto imu_right =
        imu_forward(sensor_skel, core::FootSide::Right, cfg.noise.imu, seed_k + 12);
    // Standalone ankle unit (left side), an independent noise realization.
    const auto imu_solo =
        imu_forward(sensor_skel, core::FootSide::Left, cfg.noise.imu, seed_k + 13);

    RecordingFiles rec;
    rec.task = task;
    const std::string stem(core::task_id(task));
    rec.left = stem + "_left.csv";
    rec.right = stem + "_right.csv";
    rec.mocap = stem + "_mocap.csv";
    rec.imu = stem + "_imu.csv";
    rec.insole_rows = sensor_skel.frames();
    rec.mocap_rows = mocap_skel.frames();

    write_text(dir / rec.left, build_insole_csv(sensor_skel, imu_left, tmpl, cfg, layout,
                                                core::FootSide::Left, seed_k));
    write_text(dir / rec.right, build_insole_csv(sensor_skel, imu_right, tmpl, cfg, layout,
                                                 core::FootSide::Right, seed_k));
    write_text(dir / rec.mocap, build_mocap_csv(mocap_skel, cfg, seed_k));
    write_text(dir / rec.imu, build_imu_csv(imu_solo));
    for (const std::string* f : {&rec.left, &rec.right, &rec.mocap, &rec.imu}) {
      files.push_back(*f);
    }
    manifest.recordings.push_back(std::move(rec));
  }

  for (const std::string& f : files) {
    manifest.hashes.emplace_back(f, hash_file((dir / f).string()));
  }
  save_json((dir / "manifest.json").string(), manifest.to_json());
  return manifest;
}

SynthManifest load_manifest(const fs::path& path) {
  return SynthManifest::from_json(load_json(path.string()));
}

}  // namespace p2pi::synth
