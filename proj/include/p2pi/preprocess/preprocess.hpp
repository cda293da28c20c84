#pragma once

#include <utility>
#include <vector>

#include "p2pi/common/json_util.hpp"
#include "p2pi/core/series.hpp"

namespace p2pi::preprocess {

using core::Series;
using core::SensorSeries;
using core::SkeletonSeries;

constexpr double kGridPeriod = 0.01;  // seconds
constexpr double kGridTolerance = 1e-9;

/// Per-channel scaling fitted on the training portion. `mean`/`stddev`
/// describe the min-max-normalized values, because standardization is applied
/// on top of the [0,1] rescale. Constant channels are flagged and get
/// stddev 1 so the transform degrades to an offset.
struct ChannelStatsEntry {
  double min = 0;
  double max = 0;
  double mean = 0;
  double stddev = 1;
  bool constant = false;
};

struct ChannelStats {
  std::vector<ChannelStatsEntry> channels;

  int width() const { return static_cast<int>(channels.size()); }
  json to_json() const;
  static ChannelStats from_json(const json& j);
};

/// Features and targets on one shared 0.01 s timestamp grid.
struct SyncedDataset {
  Series features;
  SkeletonSeries skeleton;
  ChannelStats stats;
  double grid_period = kGridPeriod;
};

struct WindowPair {
  Series features;
  SkeletonSeries skeleton;
};

/// NaN -> 0, everything else untouched.
SensorSeries zero_fill(const SensorSeries& series);

/// Linearly fills interior NaN runs of up to `max_gap` frames per coordinate
/// (time-weighted). Longer runs cut the recording; each returned segment has
/// NaN-free first and last frames and no remaining NaNs. A coordinate with no
/// data at all is a data error.
std::vector<SkeletonSeries> interpolate_gaps(const SkeletonSeries& series, int max_gap);

/// Centered mean, edge-truncated so the output length equals the input
/// length. `window` must be odd, >= 1 and <= the series length.
Series moving_average(const Series& series, int window);

/// Second-order Butterworth low-pass run forward then backward (zero phase).
/// DC gain is exactly 1; a sinusoid at the cutoff keeps ~50% amplitude after
/// the double pass.
Series lowpass(const Series& series, double cutoff_hz, double sample_rate_hz);

/// Linear interpolation onto the k*period grid covering [t0, t_last]; never
/// extrapolates. Values at existing knots are copied bitwise, so an already
/// on-grid series round-trips unchanged.
Series resample(const Series& series, double period = kGridPeriod);

ChannelStats fit_stats(const std::vector<const Series*>& parts);
ChannelStats fit_stats(const Series& series);

/// y = ((x - min)/(max - min) - mean)/stddev per channel; constant channels
/// use x - min in place of the rescale. No clipping outside the training
/// range.
Series normalize_standardize(const Series& series, const ChannelStats& stats);

/// Central differences on the interior, first-order one-sided at the ends.
/// Requires a uniform grid with step dt and at least 3 frames.
std::pair<Series, Series> derivatives(const Series& series, double dt = kGridPeriod);

/// Width w (values only) or 3w with block order [x, x', x''].
Series build_features(const Series& series, bool with_derivatives, double dt = kGridPeriod);

/// Trims both inputs to the intersection of their time ranges on the shared
/// grid. The intersection must cover at least 1 s.
SyncedDataset synchronize(const Series& features, const SkeletonSeries& skeleton);

/// Overlapping windows, feature and skeleton rows aligned index for index;
/// the final partial window is dropped.
std::vector<WindowPair> window(const SyncedDataset& dataset, int length = 100,
                               int stride = 25);

}  // namespace p2pi::preprocess
