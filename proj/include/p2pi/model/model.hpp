#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "p2pi/common/json_util.hpp"
#include "p2pi/core/series.hpp"
#include "p2pi/numerics/tape.hpp"
#include "p2pi/preprocess/preprocess.hpp"

namespace p2pi::model {

struct ModelConfig {
  int d_model = 512;
  int layers = 8;
  int heads = 8;
  double dropout = 0.1;
  int ff_dim = 4 * 512;
  int input_width = core::kSensorWidth;
  int output_width = core::kSkeletonWidth;
  int window = 100;
  std::string precision = "f32";  // "f32" or "f64"
  std::uint64_t seed = 0;

  /// Full-size configuration: d_model 512, 8 layers, 8 heads.
  static ModelConfig full_preset(bool with_derivatives);
  /// Small configuration for tests and quick runs: d_model 64, 2 layers,
  /// 4 heads.
  static ModelConfig desk_preset(bool with_derivatives);

  void validate() const;
  json to_json() const;
  static ModelConfig from_json(const json& j);
};

/// Named parameter tensors in a fixed canonical order (the order of
/// expected_shapes). Stored as 32-bit floats; computation casts to the
/// requested precision.
struct ModelWeights {
  std::vector<std::pair<std::string, numerics::Tensor<float>>> tensors;

  const numerics::Tensor<float>& get(const std::string& name) const;
  numerics::Tensor<float>& get(const std::string& name);
  bool all_finite() const;
};

/// Canonical (name, shape) list for a configuration.
std::vector<std::pair<std::string, numerics::Shape>> expected_shapes(const ModelConfig& cfg);

/// Xavier-uniform matrices, zero biases, unit layer-norm gains; deterministic
/// in cfg.seed.
ModelWeights init(const ModelConfig& cfg);

/// Sinusoidal table: PE[t,2i] = sin(t/10000^(2i/d)), PE[t,2i+1] = cos(same).
template <typename T>
numerics::Tensor<T> positional_encoding(int length, int d_model);

/// Mirrors ModelWeights.tensors into tape parameter leaves (same order).
template <typename T>
std::vector<typename numerics::Tape<T>::Var> emit_params(numerics::Tape<T>& tape,
                                                         const ModelWeights& weights);

/// Encoder forward pass: input projection + positional encoding, then
/// `layers` pre-norm blocks of multi-head self-attention and feed-forward,
/// a final norm and the output head. batch is [b, window, input_width]; the
/// result is [b, window, output_width]. Dropout fires only when training.
/// If attention_probe is given it receives one [b*heads, window, window]
/// row-stochastic tensor per layer.
template <typename T>
typename numerics::Tape<T>::Var forward(
    numerics::Tape<T>& tape, const ModelConfig& cfg,
    const std::vector<typename numerics::Tape<T>::Var>& params,
    typename numerics::Tape<T>::Var batch, bool training, numerics::RngStream& rng,
    std::vector<numerics::Tensor<T>>* attention_probe = nullptr);

/// Dropout-free single-shot forward on a throwaway tape.
numerics::Tensor<float> forward_infer(const ModelWeights& weights, const ModelConfig& cfg,
                                      const numerics::Tensor<float>& batch);

/// Per-coordinate affine de-scaling of the 63 target channels. Inactive
/// (empty) scaler means the model was trained on raw millimeters.
struct TargetScaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool active() const { return !mean.empty(); }
  json to_json() const;
  static TargetScaler from_json(const json& j);
};

/// Population mean/std per coordinate over the given series; zero-variance
/// coordinates get stddev 1.
TargetScaler fit_target_scaler(const std::vector<const core::Series*>& parts);

/// Windowed inference over a whole feature series: windows at `stride`
/// (clamped to the model window) plus a final tail window so every frame is
/// covered, predictions averaged where windows overlap, then de-scaled
/// through `scaler`.
core::SkeletonSeries predict_series(const ModelWeights& weights, const ModelConfig& cfg,
                                    const core::Series& features,
                                    const TargetScaler& scaler = {}, int stride = 25);

struct Checkpoint {
  ModelConfig config;
  preprocess::ChannelStats stats;  // sensor channel scaling
  TargetScaler target_scaler;
  ModelWeights weights;
};

/// Binary container: magic "P2PI", format version, one JSON blob (config,
/// stats, target scaler), then the named float32 tensors sorted by name.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace p2pi::model
