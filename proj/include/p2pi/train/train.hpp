#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "p2pi/common/json_util.hpp"
#include "p2pi/core/series.hpp"
#include "p2pi/model/model.hpp"
#include "p2pi/numerics/tensor.hpp"

namespace p2pi::train {

struct SchedulerConfig {
  double factor = 0.5;
  int patience = 10;
  double threshold = 1e-4;  // relative improvement required to reset the counter
  double min_lr = 1e-6;

  json to_json() const;
  static SchedulerConfig from_json(const json& j);
};

struct TrainConfig {
  double lr = 0.0005;
  double weight_decay = 0.001;
  int epochs = 200;
  int batch = 32;
  double split = 0.8;
  int stride = 25;        // window step when enumerating training windows
  double clip_norm = 0;   // 0 disables gradient clipping
  bool timing = false;    // off keeps history files byte-stable across runs
  std::uint64_t seed = 0;
  bool with_derivatives = false;
  SchedulerConfig scheduler;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& j);
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
  double seconds = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; 0 means no epoch completed
  bool aborted = false;
  std::string abort_reason;

  double best_val_loss() const;
  json to_json() const;
  /// `epoch,train_loss,val_loss,lr,seconds` with shortest round-trip doubles.
  std::string to_csv() const;
  static TrainHistory from_json(const json& j);
};

/// Mean squared error over every element plus its gradient 2(pred-target)/n.
template <typename T>
struct LossValue {
  double value = 0;
  numerics::Tensor<T> grad;
};

template <typename T>
LossValue<T> mse_loss(const numerics::Tensor<T>& pred, const numerics::Tensor<T>& target);

/// Master copy of the trainable parameters, held in 64-bit floats so the
/// optimizer arithmetic is exact regardless of the forward-pass precision.
/// Matrices carry weight decay; vectors (biases, norm gains) do not.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<numerics::Tensor<double>> values;
  std::vector<char> decay;

  static ParamSet from_weights(const model::ModelWeights& w);
  model::ModelWeights to_weights() const;  // rounds to f32
};

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<numerics::Tensor<double>> m;
  std::vector<numerics::Tensor<double>> v;

  static OptimizerState init(const ParamSet& params);
};

/// One AdamW update: decoupled decay w -= lr*wd*w on decaying tensors, then
/// the bias-corrected moment step. Throws NumericError on any non-finite
/// gradient without touching weights or state.
void adamw_step(ParamSet& params, const std::vector<numerics::Tensor<double>>& grads,
                OptimizerState& state, double lr, double weight_decay);

/// Scales all gradients by max_norm/norm when the global L2 norm exceeds
/// max_norm; returns the pre-clip norm. max_norm <= 0 leaves them untouched.
double clip_gradients(std::vector<numerics::Tensor<double>>& grads, double max_norm);

/// Validation-loss plateau detector. lr halves (times `factor`, floored at
/// min_lr) after `patience` consecutive epochs without a relative improvement
/// of more than `threshold`; any improvement resets the counter.
class PlateauScheduler {
 public:
  PlateauScheduler(const SchedulerConfig& cfg, double initial_lr);

  /// Feed one epoch's validation loss; returns the lr for the next epoch.
  double observe(double val_loss);
  double lr() const { return lr_; }

 private:
  SchedulerConfig cfg_;
  double lr_;
  double best_ = 0;
  bool seen_any_ = false;
  int bad_count_ = 0;
};

/// One preprocessed recording: normalized sensor features and standardized
/// skeleton targets on a shared timestamp grid.
struct Recording {
  core::Series features;
  core::SkeletonSeries targets;
};

struct WindowRef {
  int recording = 0;
  std::size_t offset = 0;  // frames [offset, offset + window)
};

struct SplitWindows {
  std::vector<WindowRef> train;
  std::vector<WindowRef> val;
  std::size_t dropped = 0;  // windows straddling a split boundary
};

std::vector<WindowRef> enumerate_windows(const std::vector<Recording>& recs, int window,
                                         int stride);

/// Chronological split per recording: the first `ratio` of each recording's
/// frames feed training windows, the rest validation; windows straddling the
/// boundary are dropped so no frame appears on both sides.
SplitWindows split_dataset(const std::vector<Recording>& recs,
                           const std::vector<WindowRef>& windows, int window,
                           double ratio = 0.8);

/// Full training loop: seeded shuffled mini-batches, per-epoch validation
/// with dropout off, plateau lr scheduling, checkpoint written whenever the
/// validation loss improves. A numeric failure mid-training stops the loop,
/// keeps the last good checkpoint on disk and returns the partial history
/// with `aborted` set.
TrainHistory fit(const std::vector<Recording>& recs, const model::ModelConfig& mcfg,
                 const TrainConfig& tcfg, const preprocess::ChannelStats& stats,
                 const model::TargetScaler& scaler,
                 const std::filesystem::path& checkpoint_path,
                 const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace p2pi::train
