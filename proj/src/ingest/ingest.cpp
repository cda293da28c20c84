#include "p2pi/ingest/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>

#include "p2pi/common/csv.hpp"
#include "p2pi/common/error.hpp"

namespace p2pi::ingest {

namespace fs = std::filesystem;

void AmplifierParams::validate() const {
  if (!(r1_ohm > 0)) throw ParameterError("amplifier R1 must be positive");
  if (r2_ohm < 0) throw ParameterError("amplifier R2 must be non-negative");
  if (!(supply_volts > 0)) throw ParameterError("supply voltage must be positive");
  if (adc_bits < 8 || adc_bits > 16) throw ParameterError("adc_bits must be in 8..16");
}

json AmplifierParams::to_json() const {
  return {{"r1_ohm", r1_ohm},
          {"r2_ohm", r2_ohm},
          {"supply_volts", supply_volts},
          {"adc_bits", adc_bits}};
}

AmplifierParams AmplifierParams::from_json(const json& j) {
  AmplifierParams p;
  p.r1_ohm = json_get<double>(j, "r1_ohm", p.r1_ohm);
  p.r2_ohm = json_get<double>(j, "r2_ohm", p.r2_ohm);
  p.supply_volts = json_get<double>(j, "supply_volts", p.supply_volts);
  p.adc_bits = json_get<int>(j, "adc_bits", p.adc_bits);
  p.validate();
  return p;
}

json IngestReport::to_json() const {
  return {{"rows_read", rows_read},
          {"rows_dropped", rows_dropped},
          {"rows_kept", rows_kept()},
          {"nan_counts", nan_counts},
          {"detected_rate_hz", detected_rate_hz},
          {"t_begin", t_begin},
          {"t_end", t_end}};
}

double amplifier_gain(const AmplifierParams& params) {
  if (!(params.r1_ohm > 0)) throw ParameterError("amplifier R1 must be positive");
  return 1.0 + params.r2_ohm / params.r1_ohm;
}

double adc_to_sensor_voltage(int count, const AmplifierParams& params) {
  params.validate();
  const int full_scale = (1 << params.adc_bits) - 1;
  if (count < 0 || count > full_scale) {
    throw FormatError("adc count " + std::to_string(count) + " outside 0.." +
                      std::to_string(full_scale));
  }
  return static_cast<double>(count) / full_scale * params.supply_volts /
         amplifier_gain(params);
}

namespace {

struct RawTable {
  std::vector<std::string> header;
  core::Series series;  // built with transformed data columns
  IngestReport report;
};

// Shared CSV row loop: header + numeric cells, empty cells as NaN, duplicate
// timestamps replaced by the later row, malformed rows dropped (or fatal in
// strict mode). `transform` may reshape the data row; returning false marks
// the row malformed.
RawTable read_table(const fs::path& path, bool strict, int out_width,
                    const std::function<bool(std::vector<double>&)>& transform) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  RawTable table;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (auto cell : split_csv(line)) table.header.emplace_back(cell);

  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  auto malformed = [&](const std::string& why) {
    if (strict) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    }
    ++table.report.rows_dropped;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++table.report.rows_read;
    const auto cells = split_csv(line);
    if (cells.size() != table.header.size()) {
      malformed("expected " + std::to_string(table.header.size()) + " columns, got " +
                std::to_string(cells.size()));
      continue;
    }
    double t;
    if (!parse_cell(cells[0], t) || !std::isfinite(t)) {
      malformed("unparseable timestamp");
      continue;
    }
    std::vector<double> row(cells.size() - 1);
    bool ok = true;
    for (std::size_t c = 1; c < cells.size() && ok; ++c) {
      ok = parse_cell(cells[c], row[c - 1]);
    }
    if (!ok || !transform(row)) {
      malformed("unparseable cell");
      continue;
    }
    if (!times.empty() && t == times.back()) {
      rows.back() = std::move(row);  // later duplicate wins
      ++table.report.rows_dropped;
      continue;
    }
    if (!times.empty() && t < times.back()) {
      malformed("timestamp went backwards");
      continue;
    }
    times.push_back(t);
    rows.push_back(std::move(row));
  }

  table.series = core::Series(out_width);
  table.report.nan_counts.assign(out_width, 0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (int c = 0; c < out_width; ++c) {
      if (std::isnan(rows[i][c])) ++table.report.nan_counts[c];
    }
    table.series.push_back(times[i], rows[i]);
  }
  if (times.size() >= 2) {
    table.report.t_begin = times.front();
    table.report.t_end = times.back();
    table.report.detected_rate_hz =
        static_cast<double>(times.size() - 1) / (times.back() - times.front());
  } else if (times.size() == 1) {
    table.report.t_begin = table.report.t_end = times.front();
  }
  return table;
}

std::vector<std::string> insole_header() {
  std::vector<std::string> h = {"t"};
  for (int i = 0; i < core::kPressureChannels; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "p%02d", i);
    h.emplace_back(buf);
  }
  for (const char* n : {"gx", "gy", "gz", "ax", "ay", "az"}) h.emplace_back(n);
  return h;
}

}  // namespace

std::pair<SensorSeries, IngestReport> read_insole_csv(const fs::path& path, FootSide side,
                                                      const AmplifierParams& params,
                                                      bool strict) {
  params.validate();
  const int full_scale = (1 << params.adc_bits) - 1;
  const double to_volts = params.supply_volts / amplifier_gain(params) / full_scale;
  auto transform = [&](std::vector<double>& row) {
    for (int c = 0; c < core::kPressureChannels; ++c) {
      if (std::isnan(row[c])) continue;
      if (row[c] < 0 || row[c] > full_scale || row[c] != std::floor(row[c])) {
        return false;  // not a converter count
      }
      row[c] *= to_volts;
    }
    return true;
  };
  RawTable table = read_table(path, strict, core::kFootWidth, transform);
  const auto expected = insole_header();
  if (table.header != expected) {
    throw FormatError(path.string() + ": bad insole header for " +
                      (side == FootSide::Left ? std::string("left") : std::string("right")) +
                      " foot file");
  }
  return {std::move(table.series), std::move(table.report)};
}

std::pair<SkeletonSeries, IngestReport> read_mocap_csv(const fs::path& path, bool strict) {
  std::vector<int> gather;  // output coordinate -> data column index
  auto transform = [&gather](std::vector<double>& row) {
    std::vector<double> out(core::kSkeletonWidth);
    for (int i = 0; i < core::kSkeletonWidth; ++i) out[i] = row[gather[i]];
    row = std::move(out);
    return true;
  };

  // Separate pass over the header to build the gather map before read_table
  // starts calling transform.
  std::ifstream head(path);
  if (!head) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(head, line)) throw FormatError(path.string() + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto cols = split_csv(line);
  if (cols.empty() || cols[0] != "t") {
    throw FormatError(path.string() + ": first column must be t");
  }
  const char* axes[3] = {".x", ".y", ".z"};
  for (int j = 0; j < core::kJointCount; ++j) {
    const std::string joint(core::joint_name(static_cast<core::JointId>(j)));
    for (const char* axis : axes) {
      const std::string want = joint + axis;
      auto it = std::find(cols.begin(), cols.end(), want);
      if (it == cols.end()) {
        throw FormatError(path.string() + ": missing column for joint " + joint);
      }
      gather.push_back(static_cast<int>(it - cols.begin()) - 1);  // data index
    }
  }
  RawTable table = read_table(path, strict, core::kSkeletonWidth, transform);
  return {std::move(table.series), std::move(table.report)};
}

std::pair<SensorSeries, IngestReport> read_imu_csv(const fs::path& path, bool strict) {
  auto transform = [](std::vector<double>&) { return true; };
  RawTable table = read_table(path, strict, 6, transform);
  const std::vector<std::string> expected = {"t", "gx", "gy", "gz", "ax", "ay", "az"};
  if (table.header != expected) {
    throw FormatError(path.string() + ": bad imu header");
  }
  return {std::move(table.series), std::move(table.report)};
}

namespace {

// Index of the right-series frame nearest to t, two-pointer style; j only
// moves forward across calls.
std::size_t advance_nearest(const core::Series& s, std::size_t& j, double t) {
  while (j + 1 < s.frames() &&
         std::abs(s.time(j + 1) - t) <= std::abs(s.time(j) - t)) {
    ++j;
  }
  return j;
}

}  // namespace

SensorSeries substitute_imu(const SensorSeries& foot, const SensorSeries& imu,
                            double tolerance) {
  if (foot.width() != core::kFootWidth || imu.width() != 6) {
    throw ShapeError("substitute_imu expects a 41-wide foot series and a 6-wide imu series");
  }
  if (imu.empty()) return foot;
  SensorSeries out(foot.width());
  out.meta = foot.meta;
  std::vector<double> row(foot.width());
  std::size_t j = 0;
  for (std::size_t i = 0; i < foot.frames(); ++i) {
    auto r = foot.row(i);
    std::copy(r.begin(), r.end(), row.begin());
    const std::size_t k = advance_nearest(imu, j, foot.time(i));
    if (std::abs(imu.time(k) - foot.time(i)) <= tolerance) {
      for (int c = 0; c < 6; ++c) row[core::kPressureChannels + c] = imu.at(k, c);
    }
    out.push_back(foot.time(i), row);
  }
  return out;
}

std::pair<SensorSeries, MergeReport> merge_feet(const SensorSeries& left,
                                                const SensorSeries& right,
                                                double tolerance) {
  if (left.empty() || right.empty()) throw DataError("merge_feet needs data for both feet");
  if (left.width() != core::kFootWidth || right.width() != core::kFootWidth) {
    throw ShapeError("merge_feet expects 41-wide per-foot series");
  }
  if (std::min(left.back_time(), right.back_time()) <
      std::max(left.front_time(), right.front_time())) {
    throw AlignmentError("left and right foot recordings do not overlap in time");
  }
  SensorSeries out(core::kSensorWidth);
  out.meta = left.meta;
  MergeReport report;
  std::vector<bool> right_used(right.frames(), false);
  std::vector<double> row(core::kSensorWidth);
  std::size_t j = 0;
  for (std::size_t i = 0; i < left.frames(); ++i) {
    const double t = left.time(i);
    const std::size_t k = advance_nearest(right, j, t);
    if (std::abs(right.time(k) - t) > tolerance) {
      ++report.dropped_left;
      continue;
    }
    right_used[k] = true;
    auto lr = left.row(i);
    auto rr = right.row(k);
    std::copy(lr.begin(), lr.end(), row.begin());
    std::copy(rr.begin(), rr.end(), row.begin() + core::kFootWidth);
    out.push_back(t, row);
    ++report.paired;
  }
  report.dropped_right =
      std::count(right_used.begin(), right_used.end(), false);
  if (out.empty()) throw AlignmentError("no left/right frame pairs within tolerance");
  return {std::move(out), report};
}

}  // namespace p2pi::ingest
