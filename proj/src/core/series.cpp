#include "p2pi/core/series.hpp"

#include <algorithm>

namespace p2pi::core {

void Series::push_back(Timestamp t, std::span<const double> row) {
  if (static_cast<int>(row.size()) != width_) {
    throw ShapeError("row width " + std::to_string(row.size()) + " != series width " +
                     std::to_string(width_));
  }
  if (!timestamps_.empty() && t <= timestamps_.back()) {
    throw DataError("timestamps must strictly increase");
  }
  timestamps_.push_back(t);
  values_.insert(values_.end(), row.begin(), row.end());
}

std::span<double> Series::append_row(Timestamp t) {
  if (!timestamps_.empty() && t <= timestamps_.back()) {
    throw DataError("timestamps must strictly increase");
  }
  timestamps_.push_back(t);
  values_.resize(values_.size() + width_, 0.0);
  return row(timestamps_.size() - 1);
}

Series Series::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > timestamps_.size()) {
    throw ParameterError("slice [" + std::to_string(first) + "," + std::to_string(last) +
                         ") out of range for " + std::to_string(timestamps_.size()) +
                         " frames");
  }
  Series out(width_);
  out.meta = meta;
  out.timestamps_.assign(timestamps_.begin() + first, timestamps_.begin() + last);
  out.values_.assign(values_.begin() + first * width_, values_.begin() + last * width_);
  return out;
}

SkeletonFrame skeleton_frame(const Series& s, std::size_t i) {
  if (s.width() != kSkeletonWidth) throw ShapeError("series is not skeleton-wide");
  SkeletonFrame f;
  f.t = s.time(i);
  auto r = s.row(i);
  std::copy(r.begin(), r.end(), f.coords.begin());
  return f;
}

SensorFrame sensor_frame(const Series& s, std::size_t i) {
  if (s.width() != kSensorWidth) throw ShapeError("series is not sensor-wide");
  SensorFrame f;
  f.t = s.time(i);
  auto r = s.row(i);
  std::copy(r.begin(), r.end(), f.values.begin());
  return f;
}

}  // namespace p2pi::core
