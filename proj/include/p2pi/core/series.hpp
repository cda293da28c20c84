#pragma once

#include <span>
#include <string>
#include <vector>

#include "p2pi/core/types.hpp"

namespace p2pi::core {

struct SeriesMeta {
  std::string subject;
  TaskLabel task = TaskLabel::Unknown;
  double source_rate_hz = 0;  // 0 = unknown
};

/// Uniform-width timestamped rows. Sensor series (width 41/82/246) and
/// skeleton series (width 63) share this container; timestamps are strictly
/// increasing.
class Series {
 public:
  Series() = default;
  explicit Series(int width) : width_(width) {}

  int width() const { return width_; }
  std::size_t frames() const { return timestamps_.size(); }
  bool empty() const { return timestamps_.empty(); }

  Timestamp time(std::size_t i) const { return timestamps_[i]; }
  Timestamp front_time() const { return timestamps_.front(); }
  Timestamp back_time() const { return timestamps_.back(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * width_, static_cast<std::size_t>(width_)};
  }
  std::span<double> row(std::size_t i) {
    return {values_.data() + i * width_, static_cast<std::size_t>(width_)};
  }
  double at(std::size_t frame, int channel) const { return values_[frame * width_ + channel]; }
  double& at(std::size_t frame, int channel) { return values_[frame * width_ + channel]; }

  /// Appends a row; throws ShapeError on width mismatch, DataError if t does
  /// not strictly increase.
  void push_back(Timestamp t, std::span<const double> row);

  /// Appends a row of zeros at t and returns a writable view of it.
  std::span<double> append_row(Timestamp t);

  const std::vector<Timestamp>& timestamps() const { return timestamps_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Frames [first, last) as a new series (metadata preserved).
  Series slice(std::size_t first, std::size_t last) const;

  SeriesMeta meta;

 private:
  int width_ = 0;
  std::vector<Timestamp> timestamps_;
  std::vector<double> values_;  // frames x width, row-major
};

using SensorSeries = Series;
using SkeletonSeries = Series;

SkeletonFrame skeleton_frame(const Series& s, std::size_t i);
SensorFrame sensor_frame(const Series& s, std::size_t i);

}  // namespace p2pi::core
