#include "p2pi/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "p2pi/common/error.hpp"

namespace p2pi::preprocess {

namespace {

bool is_nan(double v) { return std::isnan(v); }

}  // namespace

json ChannelStats::to_json() const {
  json out = json::array();
  for (const auto& c : channels) {
    out.push_back({{"min", c.min},
                   {"max", c.max},
                   {"mean", c.mean},
                   {"std", c.stddev},
                   {"constant", c.constant}});
  }
  return out;
}

ChannelStats ChannelStats::from_json(const json& j) {
  ChannelStats stats;
  for (const auto& c : j) {
    stats.channels.push_back({c.at("min").get<double>(), c.at("max").get<double>(),
                              c.at("mean").get<double>(), c.at("std").get<double>(),
                              c.at("constant").get<bool>()});
  }
  return stats;
}

SensorSeries zero_fill(const SensorSeries& series) {
  SensorSeries out = series;
  for (double& v : out.values()) {
    if (is_nan(v)) v = 0.0;
  }
  return out;
}

namespace {

// Emits [first, last] as a cleaned segment, cutting recursively at NaN runs
// longer than max_gap, then filling the short runs linearly in time.
void emit_segments(const SkeletonSeries& s, std::size_t first, std::size_t last,
                   int max_gap, std::vector<SkeletonSeries>& out) {
  const int width = s.width();
  // Trim edges until every coordinate is present.
  auto frame_complete = [&](std::size_t i) {
    for (int c = 0; c < width; ++c) {
      if (is_nan(s.at(i, c))) return false;
    }
    return true;
  };
  while (first <= last && !frame_complete(first)) ++first;
  while (last > first && !frame_complete(last)) --last;
  if (last <= first) return;  // fewer than 2 usable frames

  // Earliest NaN run longer than max_gap, over all coordinates.
  std::size_t cut_start = last + 1, cut_end = 0;
  for (int c = 0; c < width; ++c) {
    std::size_t i = first;
    while (i <= last) {
      if (!is_nan(s.at(i, c))) {
        ++i;
        continue;
      }
      std::size_t run_end = i;
      while (run_end < last && is_nan(s.at(run_end + 1, c))) ++run_end;
      if (run_end - i + 1 > static_cast<std::size_t>(max_gap) && i < cut_start) {
        cut_start = i;
        cut_end = run_end;
      }
      i = run_end + 1;
    }
  }
  if (cut_start <= last) {
    if (cut_start > first) emit_segments(s, first, cut_start - 1, max_gap, out);
    if (cut_end < last) emit_segments(s, cut_end + 1, last, max_gap, out);
    return;
  }

  // All remaining runs are short; fill them against the bracketing samples.
  SkeletonSeries seg(width);
  seg.meta = s.meta;
  std::vector<double> row(width);
  for (std::size_t i = first; i <= last; ++i) {
    for (int c = 0; c < width; ++c) {
      double v = s.at(i, c);
      if (is_nan(v)) {
        std::size_t a = i;
        while (is_nan(s.at(a, c))) --a;  // stops: first frame is complete
        std::size_t b = i;
        while (is_nan(s.at(b, c))) ++b;  // stops: last frame is complete
        const double w = (s.time(i) - s.time(a)) / (s.time(b) - s.time(a));
        v = s.at(a, c) + (s.at(b, c) - s.at(a, c)) * w;
      }
      row[c] = v;
    }
    seg.push_back(s.time(i), row);
  }
  out.push_back(std::move(seg));
}

}  // namespace

std::vector<SkeletonSeries> interpolate_gaps(const SkeletonSeries& series, int max_gap) {
  if (max_gap < 0) throw ParameterError("max_gap must be >= 0");
  if (series.empty()) return {};
  for (int c = 0; c < series.width(); ++c) {
    bool any = false;
    for (std::size_t i = 0; i < series.frames() && !any; ++i) {
      any = !is_nan(series.at(i, c));
    }
    if (!any) {
      throw DataError("coordinate " + std::to_string(c) + " has no data at all");
    }
  }
  std::vector<SkeletonSeries> out;
  emit_segments(series, 0, series.frames() - 1, max_gap, out);
  return out;
}

Series moving_average(const Series& series, int window) {
  const std::size_t n = series.frames();
  if (window < 1 || window % 2 == 0 || static_cast<std::size_t>(window) > n) {
    throw ParameterError("moving_average window must be odd, >= 1 and <= length");
  }
  if (window == 1) return series;
  const int width = series.width();
  const int half = window / 2;
  Series out(width);
  out.meta = series.meta;
  std::vector<double> row(width);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= static_cast<std::size_t>(half) ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    const double inv = 1.0 / static_cast<double>(hi - lo + 1);
    for (int c = 0; c < width; ++c) {
      double sum = 0;
      for (std::size_t k = lo; k <= hi; ++k) sum += series.at(k, c);
      row[c] = sum * inv;
    }
    out.push_back(series.time(i), row);
  }
  return out;
}

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;
};

Biquad butterworth2(double cutoff_hz, double sample_rate_hz) {
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
  const double sqrt2 = std::numbers::sqrt2;
  const double norm = 1.0 / (1.0 + sqrt2 * k + k * k);
  Biquad q;
  q.b0 = k * k * norm;
  q.b1 = 2.0 * q.b0;
  q.b2 = q.b0;
  q.a1 = 2.0 * (k * k - 1.0) * norm;
  q.a2 = (1.0 - sqrt2 * k + k * k) * norm;
  return q;
}

// Direct form II transposed, with the state preloaded to the steady-state
// response for a constant input x[0] (so a constant series passes through
// untouched).
void filter_forward(const Biquad& q, std::vector<double>& x) {
  if (x.empty()) return;
  const double z1_unit = 1.0 - q.b0;
  const double z2_unit = q.b2 - q.a2;
  double z1 = z1_unit * x[0];
  double z2 = z2_unit * x[0];
  for (double& v : x) {
    const double in = v;
    const double out = q.b0 * in + z1;
    z1 = q.b1 * in - q.a1 * out + z2;
    z2 = q.b2 * in - q.a2 * out;
    v = out;
  }
}

}  // namespace

Series lowpass(const Series& series, double cutoff_hz, double sample_rate_hz) {
  if (!(cutoff_hz > 0) || !(cutoff_hz < sample_rate_hz / 2)) {
    throw ParameterError("cutoff must lie in (0, sample_rate/2)");
  }
  const std::size_t n = series.frames();
  if (n < 2) return series;
  const Biquad q = butterworth2(cutoff_hz, sample_rate_hz);
  const std::size_t padlen = std::min<std::size_t>(9, n - 1);
  const int width = series.width();
  Series out(width);
  out.meta = series.meta;

  std::vector<std::vector<double>> filtered(width);
  for (int c = 0; c < width; ++c) {
    // Odd reflection on both ends damps the edge transient.
    std::vector<double> ext;
    ext.reserve(n + 2 * padlen);
    for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2 * series.at(0, c) - series.at(i, c));
    for (std::size_t i = 0; i < n; ++i) ext.push_back(series.at(i, c));
    for (std::size_t i = 1; i <= padlen; ++i) {
      ext.push_back(2 * series.at(n - 1, c) - series.at(n - 1 - i, c));
    }
    filter_forward(q, ext);
    std::reverse(ext.begin(), ext.end());
    filter_forward(q, ext);
    std::reverse(ext.begin(), ext.end());
    filtered[c].assign(ext.begin() + padlen, ext.begin() + padlen + n);
  }
  std::vector<double> row(width);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < width; ++c) row[c] = filtered[c][i];
    out.push_back(series.time(i), row);
  }
  return out;
}

Series resample(const Series& series, double period) {
  if (!(period > 0)) throw ParameterError("grid period must be positive");
  if (series.frames() < 2) {
    throw DataError("resample needs at least 2 frames");
  }
  const double t0 = series.front_time();
  const double tl = series.back_time();
  const auto k0 = static_cast<std::int64_t>(std::ceil((t0 - kGridTolerance) / period));
  const auto k1 = static_cast<std::int64_t>(std::floor((tl + kGridTolerance) / period));
  if (k1 < k0) {
    throw DataError("series spans less than one grid period");
  }
  const int width = series.width();
  Series out(width);
  out.meta = series.meta;
  out.meta.source_rate_hz = 1.0 / period;
  std::vector<double> row(width);
  std::size_t j = 0;
  for (std::int64_t k = k0; k <= k1; ++k) {
    const double t = static_cast<double>(k) * period;
    while (j + 1 < series.frames() && series.time(j + 1) < t - kGridTolerance) ++j;
    if (std::abs(series.time(j) - t) <= kGridTolerance) {
      auto r = series.row(j);
      std::copy(r.begin(), r.end(), row.begin());
    } else if (j + 1 < series.frames() &&
               std::abs(series.time(j + 1) - t) <= kGridTolerance) {
      auto r = series.row(j + 1);
      std::copy(r.begin(), r.end(), row.begin());
    } else {
      const double ta = series.time(j);
      const double tb = series.time(j + 1);
      const double w = (t - ta) / (tb - ta);
      for (int c = 0; c < width; ++c) {
        row[c] = series.at(j, c) + (series.at(j + 1, c) - series.at(j, c)) * w;
      }
    }
    out.push_back(t, row);
  }
  return out;
}

ChannelStats fit_stats(const std::vector<const Series*>& parts) {
  if (parts.empty() || parts[0]->empty()) throw DataError("fit_stats needs data");
  const int width = parts[0]->width();
  std::size_t total = 0;
  for (const Series* s : parts) {
    if (s->width() != width) throw ShapeError("fit_stats: mixed series widths");
    total += s->frames();
  }
  ChannelStats stats;
  stats.channels.resize(width);
  for (int c = 0; c < width; ++c) {
    ChannelStatsEntry& e = stats.channels[c];
    e.min = std::numeric_limits<double>::infinity();
    e.max = -std::numeric_limits<double>::infinity();
    for (const Series* s : parts) {
      for (std::size_t i = 0; i < s->frames(); ++i) {
        e.min = std::min(e.min, s->at(i, c));
        e.max = std::max(e.max, s->at(i, c));
      }
    }
    e.constant = !(e.max > e.min);
    if (e.constant) {
      e.mean = 0;
      e.stddev = 1;
      continue;
    }
    const double scale = 1.0 / (e.max - e.min);
    double sum = 0;
    for (const Series* s : parts) {
      for (std::size_t i = 0; i < s->frames(); ++i) {
        sum += (s->at(i, c) - e.min) * scale;
      }
    }
    e.mean = sum / static_cast<double>(total);
    double sq = 0;
    for (const Series* s : parts) {
      for (std::size_t i = 0; i < s->frames(); ++i) {
        const double d = (s->at(i, c) - e.min) * scale - e.mean;
        sq += d * d;
      }
    }
    e.stddev = std::sqrt(sq / static_cast<double>(total));
    if (!(e.stddev > 0)) {
      e.constant = true;
      e.stddev = 1;
    }
  }
  return stats;
}

ChannelStats fit_stats(const Series& series) { return fit_stats({&series}); }

Series normalize_standardize(const Series& series, const ChannelStats& stats) {
  if (stats.width() != series.width()) {
    throw ParameterError("stats width " + std::to_string(stats.width()) +
                         " != series width " + std::to_string(series.width()));
  }
  const int width = series.width();
  Series out(width);
  out.meta = series.meta;
  std::vector<double> row(width);
  for (std::size_t i = 0; i < series.frames(); ++i) {
    for (int c = 0; c < width; ++c) {
      const ChannelStatsEntry& e = stats.channels[c];
      const double norm = e.constant ? series.at(i, c) - e.min
                                     : (series.at(i, c) - e.min) / (e.max - e.min);
      row[c] = (norm - e.mean) / e.stddev;
    }
    out.push_back(series.time(i), row);
  }
  return out;
}

std::pair<Series, Series> derivatives(const Series& series, double dt) {
  const std::size_t n = series.frames();
  if (n < 3) throw DataError("derivatives need at least 3 frames");
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(series.time(i) - series.time(i - 1) - dt) > kGridTolerance) {
      throw DataError("derivatives require a uniform grid with step " + std::to_string(dt));
    }
  }
  const int width = series.width();
  Series d1(width), d2(width);
  d1.meta = d2.meta = series.meta;
  const double inv2dt = 1.0 / (2.0 * dt);
  const double invdt = 1.0 / dt;
  const double invdt2 = 1.0 / (dt * dt);
  std::vector<double> r1(width), r2(width);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < width; ++c) {
      if (i == 0) {
        r1[c] = (series.at(1, c) - series.at(0, c)) * invdt;
        r2[c] = (series.at(2, c) - 2 * series.at(1, c) + series.at(0, c)) * invdt2;
      } else if (i == n - 1) {
        r1[c] = (series.at(n - 1, c) - series.at(n - 2, c)) * invdt;
        r2[c] = (series.at(n - 1, c) - 2 * series.at(n - 2, c) + series.at(n - 3, c)) * invdt2;
      } else {
        r1[c] = (series.at(i + 1, c) - series.at(i - 1, c)) * inv2dt;
        r2[c] = (series.at(i + 1, c) - 2 * series.at(i, c) + series.at(i - 1, c)) * invdt2;
      }
    }
    d1.push_back(series.time(i), r1);
    d2.push_back(series.time(i), r2);
  }
  return {std::move(d1), std::move(d2)};
}

Series build_features(const Series& series, bool with_derivatives, double dt) {
  if (!with_derivatives) return series;
  auto [d1, d2] = derivatives(series, dt);
  const int width = series.width();
  Series out(3 * width);
  out.meta = series.meta;
  std::vector<double> row(3 * width);
  for (std::size_t i = 0; i < series.frames(); ++i) {
    for (int c = 0; c < width; ++c) {
      row[c] = series.at(i, c);
      row[width + c] = d1.at(i, c);
      row[2 * width + c] = d2.at(i, c);
    }
    out.push_back(series.time(i), row);
  }
  return out;
}

namespace {

void require_on_grid(const Series& s, const char* what) {
  for (std::size_t i = 1; i < s.frames(); ++i) {
    if (std::abs(s.time(i) - s.time(i - 1) - kGridPeriod) > kGridTolerance) {
      throw AlignmentError(std::string(what) + " series is not on the 0.01 s grid");
    }
  }
}

}  // namespace

SyncedDataset synchronize(const Series& features, const SkeletonSeries& skeleton) {
  if (features.empty() || skeleton.empty()) {
    throw AlignmentError("cannot synchronize an empty series");
  }
  require_on_grid(features, "feature");
  require_on_grid(skeleton, "skeleton");
  const double start = std::max(features.front_time(), skeleton.front_time());
  const double stop = std::min(features.back_time(), skeleton.back_time());
  if (stop - start < 1.0 - kGridTolerance) {
    throw AlignmentError("time-range overlap is shorter than 1 s");
  }
  const auto f0 = static_cast<std::size_t>(
      std::llround((start - features.front_time()) / kGridPeriod));
  const auto s0 = static_cast<std::size_t>(
      std::llround((start - skeleton.front_time()) / kGridPeriod));
  const auto count =
      static_cast<std::size_t>(std::llround((stop - start) / kGridPeriod)) + 1;

  SyncedDataset out;
  out.features = features.slice(f0, f0 + count);
  // Rebuild the skeleton on the feature timestamps so the shared grid is
  // bitwise identical, not merely within tolerance.
  SkeletonSeries aligned(skeleton.width());
  aligned.meta = skeleton.meta;
  for (std::size_t i = 0; i < count; ++i) {
    if (std::abs(skeleton.time(s0 + i) - out.features.time(i)) > kGridTolerance) {
      throw AlignmentError("grids disagree after trimming");
    }
    aligned.push_back(out.features.time(i), skeleton.row(s0 + i));
  }
  out.skeleton = std::move(aligned);
  return out;
}

std::vector<WindowPair> window(const SyncedDataset& dataset, int length, int stride) {
  if (length < 1 || stride < 1) throw ParameterError("window length/stride must be >= 1");
  const std::size_t n = dataset.features.frames();
  if (n < static_cast<std::size_t>(length)) {
    throw DataError("dataset shorter than one window");
  }
  std::vector<WindowPair> out;
  for (std::size_t o = 0; o + length <= n; o += stride) {
    out.push_back({dataset.features.slice(o, o + length),
                   dataset.skeleton.slice(o, o + length)});
  }
  return out;
}

}  // namespace p2pi::preprocess
