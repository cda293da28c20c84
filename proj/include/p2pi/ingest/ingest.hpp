#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "p2pi/common/json_util.hpp"
#include "p2pi/core/series.hpp"

namespace p2pi::ingest {

using core::FootSide;
using core::SensorSeries;
using core::SkeletonSeries;

/// Front-end amplifier and converter of the pressure channels: a
/// non-inverting stage with gain 1 + R2/R1 feeding an adc_bits ADC that spans
/// the supply rail.
struct AmplifierParams {
  double r1_ohm = 10e3;
  double r2_ohm = 33e3;
  double supply_volts = 3.3;
  int adc_bits = 12;

  void validate() const;
  json to_json() const;
  static AmplifierParams from_json(const json& j);
};

struct IngestReport {
  std::int64_t rows_read = 0;
  std::int64_t rows_dropped = 0;
  std::vector<std::int64_t> nan_counts;  // per data column
  double detected_rate_hz = 0;
  double t_begin = 0;
  double t_end = 0;

  std::int64_t rows_kept() const { return rows_read - rows_dropped; }
  json to_json() const;
};

struct MergeReport {
  std::int64_t paired = 0;
  std::int64_t dropped_left = 0;
  std::int64_t dropped_right = 0;
};

double amplifier_gain(const AmplifierParams& params);

/// Inverse of the front end: converter count back to the voltage at the
/// sensing element. Monotone in count; count outside the converter range is a
/// format error.
double adc_to_sensor_voltage(int count, const AmplifierParams& params);

/// One foot per file: `t,p00..p34,gx,gy,gz,ax,ay,az`. Pressure columns hold
/// raw converter counts and come back as volts; empty cells come back as NaN.
/// A timestamp equal to the previous row replaces it (later wins, counted as
/// dropped). In strict mode any malformed row aborts; otherwise it is dropped
/// and counted.
std::pair<SensorSeries, IngestReport> read_insole_csv(const std::filesystem::path& path,
                                                      FootSide side,
                                                      const AmplifierParams& params,
                                                      bool strict = false);

/// `t,<Joint>.x,<Joint>.y,<Joint>.z` for all 21 joints, any column order,
/// coordinates in millimeters. Empty cells stay NaN for gap interpolation.
std::pair<SkeletonSeries, IngestReport> read_mocap_csv(const std::filesystem::path& path,
                                                       bool strict = false);

/// Standalone ankle IMU file: `t,gx,gy,gz,ax,ay,az`.
std::pair<SensorSeries, IngestReport> read_imu_csv(const std::filesystem::path& path,
                                                   bool strict = false);

/// Replaces the six IMU channels of a one-foot series with the nearest
/// standalone-IMU frame within `tolerance`; frames without a match keep the
/// insole's own IMU values.
SensorSeries substitute_imu(const SensorSeries& foot, const SensorSeries& imu,
                            double tolerance = 0.005);

/// Pairs right-foot frames onto left-foot timestamps (nearest neighbor within
/// `tolerance`) and concatenates into the 82-wide layout. Unpaired frames on
/// either side are dropped and counted.
std::pair<SensorSeries, MergeReport> merge_feet(const SensorSeries& left,
                                               const SensorSeries& right,
                                               double tolerance = 0.005);

}  // namespace p2pi::ingest
