#include "p2pi/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "p2pi/common/error.hpp"
#include "p2pi/numerics/rng.hpp"

namespace p2pi::model {

using numerics::RngStream;
using numerics::Shape;
using numerics::Tape;
using numerics::Tensor;

ModelConfig ModelConfig::full_preset(bool with_derivatives) {
  ModelConfig cfg;
  cfg.d_model = 512;
  cfg.layers = 8;
  cfg.heads = 8;
  cfg.ff_dim = 4 * cfg.d_model;
  cfg.input_width = with_derivatives ? 3 * core::kSensorWidth : core::kSensorWidth;
  return cfg;
}

ModelConfig ModelConfig::desk_preset(bool with_derivatives) {
  ModelConfig cfg;
  cfg.d_model = 64;
  cfg.layers = 2;
  cfg.heads = 4;
  cfg.ff_dim = 4 * cfg.d_model;
  cfg.input_width = with_derivatives ? 3 * core::kSensorWidth : core::kSensorWidth;
  return cfg;
}

void ModelConfig::validate() const {
  if (d_model < 1 || layers < 1 || heads < 1 || ff_dim < 1) {
    throw ParameterError("model dimensions must be positive");
  }
  if (d_model % heads != 0) {
    throw ParameterError("d_model " + std::to_string(d_model) +
                         " not divisible by heads " + std::to_string(heads));
  }
  if (input_width < 1 || output_width < 1 || window < 1) {
    throw ParameterError("widths and window must be positive");
  }
  if (dropout < 0 || dropout >= 1) throw ParameterError("dropout must be in [0,1)");
  if (precision != "f32" && precision != "f64") {
    throw ParameterError("precision must be f32 or f64");
  }
}

json ModelConfig::to_json() const {
  return {{"d_model", d_model},     {"layers", layers},
          {"heads", heads},         {"dropout", dropout},
          {"ff_dim", ff_dim},       {"input_width", input_width},
          {"output_width", output_width}, {"window", window},
          {"precision", precision}, {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.d_model = json_get<int>(j, "d_model", c.d_model);
  c.layers = json_get<int>(j, "layers", c.layers);
  c.heads = json_get<int>(j, "heads", c.heads);
  c.dropout = json_get<double>(j, "dropout", c.dropout);
  c.ff_dim = json_get<int>(j, "ff_dim", 4 * c.d_model);
  c.input_width = json_get<int>(j, "input_width", c.input_width);
  c.output_width = json_get<int>(j, "output_width", c.output_width);
  c.window = json_get<int>(j, "window", c.window);
  c.precision = json_get<std::string>(j, "precision", c.precision);
  c.seed = json_get<std::uint64_t>(j, "seed", c.seed);
  c.validate();
  return c;
}

const Tensor<float>& ModelWeights::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw ParameterError("no weight tensor named " + name);
}

Tensor<float>& ModelWeights::get(const std::string& name) {
  for (auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw ParameterError("no weight tensor named " + name);
}

bool ModelWeights::all_finite() const {
  for (const auto& [n, t] : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

std::vector<std::pair<std::string, Shape>> expected_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::int64_t d = cfg.d_model, ff = cfg.ff_dim;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("w_in", Shape{cfg.input_width, d});
  out.emplace_back("b_in", Shape{d});
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    out.emplace_back(p + "ln1.gain", Shape{d});
    out.emplace_back(p + "ln1.bias", Shape{d});
    out.emplace_back(p + "attn.wq", Shape{d, d});
    out.emplace_back(p + "attn.wk", Shape{d, d});
    out.emplace_back(p + "attn.wv", Shape{d, d});
    out.emplace_back(p + "attn.wo", Shape{d, d});
    out.emplace_back(p + "ln2.gain", Shape{d});
    out.emplace_back(p + "ln2.bias", Shape{d});
    out.emplace_back(p + "ff.w1", Shape{d, ff});
    out.emplace_back(p + "ff.b1", Shape{ff});
    out.emplace_back(p + "ff.w2", Shape{ff, d});
    out.emplace_back(p + "ff.b2", Shape{d});
  }
  out.emplace_back("final_norm.gain", Shape{d});
  out.emplace_back("final_norm.bias", Shape{d});
  out.emplace_back("w_out", Shape{d, cfg.output_width});
  out.emplace_back("b_out", Shape{cfg.output_width});
  return out;
}

ModelWeights init(const ModelConfig& cfg) {
  RngStream rng(cfg.seed, 0);
  ModelWeights w;
  for (const auto& [name, shape] : expected_shapes(cfg)) {
    Tensor<float> t(shape);
    if (shape.rank() == 2) {
      const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      for (std::int64_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<float>(rng.uniform(-bound, bound));
      }
    } else if (name.ends_with(".gain")) {
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 1.0f;
    }  // biases stay zero
    w.tensors.emplace_back(name, std::move(t));
  }
  return w;
}

template <typename T>
Tensor<T> positional_encoding(int length, int d_model) {
  if (length < 1 || d_model < 1) throw ParameterError("positional encoding needs length, d >= 1");
  Tensor<T> pe({length, d_model});
  for (int t = 0; t < length; ++t) {
    for (int i = 0; i < d_model; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d_model);
      pe.at(t, i) = static_cast<T>(std::sin(t * freq));
      if (i + 1 < d_model) pe.at(t, i + 1) = static_cast<T>(std::cos(t * freq));
    }
  }
  return pe;
}

template Tensor<float> positional_encoding<float>(int, int);
template Tensor<double> positional_encoding<double>(int, int);

template <typename T>
std::vector<typename Tape<T>::Var> emit_params(Tape<T>& tape, const ModelWeights& weights) {
  std::vector<typename Tape<T>::Var> vars;
  vars.reserve(weights.tensors.size());
  for (const auto& [name, t] : weights.tensors) {
    vars.push_back(tape.param(t.template cast<T>()));
  }
  return vars;
}

template std::vector<Tape<float>::Var> emit_params<float>(Tape<float>&, const ModelWeights&);
template std::vector<Tape<double>::Var> emit_params<double>(Tape<double>&, const ModelWeights&);

namespace {

// Parameter lookup by canonical position, so forward() never searches names.
struct ParamIndex {
  int per_layer_base;
  int tail_base;

  explicit ParamIndex(const ModelConfig& cfg)
      : per_layer_base(2), tail_base(2 + 12 * cfg.layers) {}

  int layer(int i, int slot) const { return per_layer_base + 12 * i + slot; }
};

}  // namespace

template <typename T>
typename Tape<T>::Var forward(Tape<T>& tape, const ModelConfig& cfg,
                              const std::vector<typename Tape<T>::Var>& params,
                              typename Tape<T>::Var batch, bool training, RngStream& rng,
                              std::vector<Tensor<T>>* attention_probe) {
  using Var = typename Tape<T>::Var;
  cfg.validate();
  const Shape& bs = tape.shape(batch);
  if (bs.rank() != 3 || bs[1] != cfg.window || bs[2] != cfg.input_width) {
    throw ShapeError("batch shape " + bs.str() + " does not match window " +
                     std::to_string(cfg.window) + " x input width " +
                     std::to_string(cfg.input_width));
  }
  const std::int64_t b = bs[0], w = bs[1];
  const std::int64_t d = cfg.d_model;
  const std::int64_t h = cfg.heads;
  const std::int64_t dh = d / h;
  const T rate = static_cast<T>(cfg.dropout);
  const ParamIndex ix(cfg);

  // Input projection + positional encoding.
  Var x = tape.reshape(batch, {b * w, cfg.input_width});
  x = tape.add_bcast(tape.matmul(x, params[0]), params[1]);
  x = tape.reshape(x, {b, w, d});
  x = tape.add_bcast(x, tape.input(positional_encoding<T>(static_cast<int>(w), cfg.d_model)));
  x = tape.dropout(x, rate, rng, training);

  for (int layer = 0; layer < cfg.layers; ++layer) {
    // Self-attention, pre-norm.
    Var n1 = tape.layer_norm(x, params[ix.layer(layer, 0)], params[ix.layer(layer, 1)]);
    Var flat = tape.reshape(n1, {b * w, d});
    auto heads_view = [&](Var m) {
      // [b*w, d] -> [b*heads, w, head_dim]
      Var r = tape.reshape(m, {b, w, h, dh});
      return tape.reshape(tape.permute(r, {0, 2, 1, 3}), {b * h, w, dh});
    };
    Var q = heads_view(tape.matmul(flat, params[ix.layer(layer, 2)]));
    Var k = heads_view(tape.matmul(flat, params[ix.layer(layer, 3)]));
    Var v = heads_view(tape.matmul(flat, params[ix.layer(layer, 4)]));
    Var scores = tape.scale(tape.bmm(q, tape.permute(k, {0, 2, 1, 3})),
                            static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
    Var probs = tape.softmax(scores);
    if (attention_probe) attention_probe->push_back(tape.value(probs));
    Var ctx = tape.bmm(probs, v);  // [b*h, w, dh]
    ctx = tape.reshape(ctx, {b, h, w, dh});
    ctx = tape.reshape(tape.permute(ctx, {0, 2, 1, 3}), {b * w, d});
    Var attn = tape.matmul(ctx, params[ix.layer(layer, 5)]);
    attn = tape.dropout(tape.reshape(attn, {b, w, d}), rate, rng, training);
    x = tape.add(x, attn);

    // Feed-forward, pre-norm.
    Var n2 = tape.layer_norm(x, params[ix.layer(layer, 6)], params[ix.layer(layer, 7)]);
    Var ff = tape.reshape(n2, {b * w, d});
    ff = tape.add_bcast(tape.matmul(ff, params[ix.layer(layer, 8)]),
                        params[ix.layer(layer, 9)]);
    ff = tape.gelu(ff);
    ff = tape.add_bcast(tape.matmul(ff, params[ix.layer(layer, 10)]),
                        params[ix.layer(layer, 11)]);
    ff = tape.dropout(tape.reshape(ff, {b, w, d}), rate, rng, training);
    x = tape.add(x, ff);

    if (!tape.value(x).all_finite()) {
      throw NumericError("non-finite activations after encoder layer " +
                         std::to_string(layer));
    }
  }

  Var out = tape.layer_norm(x, params[ix.tail_base], params[ix.tail_base + 1]);
  out = tape.reshape(out, {b * w, d});
  out = tape.add_bcast(tape.matmul(out, params[ix.tail_base + 2]), params[ix.tail_base + 3]);
  out = tape.reshape(out, {b, w, cfg.output_width});
  if (!tape.value(out).all_finite()) {
    throw NumericError("non-finite activations in the output head");
  }
  return out;
}

template Tape<float>::Var forward<float>(Tape<float>&, const ModelConfig&,
                                         const std::vector<Tape<float>::Var>&,
                                         Tape<float>::Var, bool, RngStream&,
                                         std::vector<Tensor<float>>*);
template Tape<double>::Var forward<double>(Tape<double>&, const ModelConfig&,
                                           const std::vector<Tape<double>::Var>&,
                                           Tape<double>::Var, bool, RngStream&,
                                           std::vector<Tensor<double>>*);

Tensor<float> forward_infer(const ModelWeights& weights, const ModelConfig& cfg,
                            const Tensor<float>& batch) {
  Tape<float> tape;
  std::vector<Tape<float>::Var> vars;
  vars.reserve(weights.tensors.size());
  for (const auto& [name, t] : weights.tensors) vars.push_back(tape.input(t));
  RngStream unused(0, 0);
  Tape<float>::Var out = forward<float>(tape, cfg, vars, tape.input(batch), false, unused);
  return tape.value(out);
}

json TargetScaler::to_json() const {
  return {{"mean", mean}, {"std", stddev}};
}

TargetScaler TargetScaler::from_json(const json& j) {
  TargetScaler s;
  if (j.contains("mean")) s.mean = j.at("mean").get<std::vector<double>>();
  if (j.contains("std")) s.stddev = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) {
    throw CheckpointError("target scaler mean/std lengths differ");
  }
  return s;
}

TargetScaler fit_target_scaler(const std::vector<const core::Series*>& parts) {
  if (parts.empty() || parts[0]->empty()) throw DataError("target scaler needs data");
  const int width = parts[0]->width();
  std::size_t total = 0;
  for (const core::Series* s : parts) total += s->frames();
  TargetScaler scaler;
  scaler.mean.assign(width, 0.0);
  scaler.stddev.assign(width, 0.0);
  for (const core::Series* s : parts) {
    for (std::size_t i = 0; i < s->frames(); ++i) {
      for (int c = 0; c < width; ++c) scaler.mean[c] += s->at(i, c);
    }
  }
  for (int c = 0; c < width; ++c) scaler.mean[c] /= static_cast<double>(total);
  for (const core::Series* s : parts) {
    for (std::size_t i = 0; i < s->frames(); ++i) {
      for (int c = 0; c < width; ++c) {
        const double dlt = s->at(i, c) - scaler.mean[c];
        scaler.stddev[c] += dlt * dlt;
      }
    }
  }
  for (int c = 0; c < width; ++c) {
    scaler.stddev[c] = std::sqrt(scaler.stddev[c] / static_cast<double>(total));
    if (!(scaler.stddev[c] > 0)) scaler.stddev[c] = 1.0;
  }
  return scaler;
}

core::SkeletonSeries predict_series(const ModelWeights& weights, const ModelConfig& cfg,
                                    const core::Series& features,
                                    const TargetScaler& scaler, int stride) {
  cfg.validate();
  if (stride < 1) throw ParameterError("stride must be >= 1");
  // A stride past the window would leave uncovered frames with no prediction.
  stride = std::min(stride, cfg.window);
  if (features.width() != cfg.input_width) {
    throw ShapeError("feature width " + std::to_string(features.width()) +
                     " does not match model input width " + std::to_string(cfg.input_width));
  }
  const std::size_t n = features.frames();
  const std::size_t win = static_cast<std::size_t>(cfg.window);
  if (n < win) throw DataError("series shorter than one model window");
  if (scaler.active() && static_cast<int>(scaler.mean.size()) != cfg.output_width) {
    throw ShapeError("target scaler width does not match the output head");
  }

  std::vector<std::size_t> offsets;
  for (std::size_t o = 0; o + win <= n; o += stride) offsets.push_back(o);
  if (offsets.back() + win < n) offsets.push_back(n - win);  // cover the tail

  std::vector<double> sum(n * cfg.output_width, 0.0);
  std::vector<int> hits(n, 0);
  const std::size_t chunk = 16;  // windows per forward pass
  for (std::size_t base = 0; base < offsets.size(); base += chunk) {
    const std::size_t nb = std::min(chunk, offsets.size() - base);
    Tensor<float> batch({static_cast<std::int64_t>(nb), cfg.window, cfg.input_width});
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const std::size_t o = offsets[base + bi];
      for (std::size_t f = 0; f < win; ++f) {
        auto row = features.row(o + f);
        for (int c = 0; c < cfg.input_width; ++c) {
          batch.at(static_cast<std::int64_t>(bi), static_cast<std::int64_t>(f), c) =
              static_cast<float>(row[c]);
        }
      }
    }
    Tensor<float> pred = forward_infer(weights, cfg, batch);
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const std::size_t o = offsets[base + bi];
      for (std::size_t f = 0; f < win; ++f) {
        ++hits[o + f];
        for (int c = 0; c < cfg.output_width; ++c) {
          sum[(o + f) * cfg.output_width + c] +=
              pred.at(static_cast<std::int64_t>(bi), static_cast<std::int64_t>(f), c);
        }
      }
    }
  }

  core::SkeletonSeries out(cfg.output_width);
  out.meta = features.meta;
  std::vector<double> row(cfg.output_width);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < cfg.output_width; ++c) {
      double v = sum[i * cfg.output_width + c] / hits[i];
      if (scaler.active()) v = v * scaler.stddev[c] + scaler.mean[c];
      row[c] = v;
    }
    out.push_back(features.time(i), row);
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'P', '2', 'P', 'I'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
  write_bytes(out, &v, sizeof v);
}

void read_bytes(std::ifstream& in, void* p, std::size_t n) {
  if (!in.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) {
    throw CheckpointError("truncated checkpoint");
  }
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v;
  read_bytes(in, &v, sizeof v);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.config.validate();
  if (!ckpt.weights.all_finite()) {
    throw CheckpointError("refusing to save non-finite weights");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_bytes(out, kMagic, 4);
  write_pod<std::uint32_t>(out, kVersion);
  const json meta = {{"model", ckpt.config.to_json()},
                     {"stats", ckpt.stats.to_json()},
                     {"target_scaler", ckpt.target_scaler.to_json()}};
  const std::string blob = meta.dump();
  write_pod<std::uint64_t>(out, blob.size());
  write_bytes(out, blob.data(), blob.size());

  std::vector<const std::pair<std::string, Tensor<float>>*> sorted;
  for (const auto& entry : ckpt.weights.tensors) sorted.push_back(&entry);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });
  write_pod<std::uint64_t>(out, sorted.size());
  for (const auto* entry : sorted) {
    const auto& [name, t] = *entry;
    write_pod<std::uint64_t>(out, name.size());
    write_bytes(out, name.data(), name.size());
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().rank()));
    for (int i = 0; i < t.shape().rank(); ++i) {
      write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.shape()[i]));
    }
    write_bytes(out, t.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
  }
  if (!out) throw IoError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  read_bytes(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(path.string() + ": bad magic, not a checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto blob_len = read_pod<std::uint64_t>(in);
  std::string blob(blob_len, '\0');
  read_bytes(in, blob.data(), blob_len);
  json meta;
  try {
    meta = json::parse(blob);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("unreadable checkpoint metadata: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json(meta.at("model"));
  ckpt.stats = preprocess::ChannelStats::from_json(meta.at("stats"));
  ckpt.target_scaler = TargetScaler::from_json(meta.at("target_scaler"));

  const auto count = read_pod<std::uint64_t>(in);
  std::vector<std::pair<std::string, Tensor<float>>> loaded;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint64_t>(in);
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len);
    const auto rank = read_pod<std::uint32_t>(in);
    if (rank < 1 || rank > 4) throw CheckpointError("tensor " + name + " has bad rank");
    std::vector<std::int64_t> dims(rank);
    for (auto& dim : dims) dim = static_cast<std::int64_t>(read_pod<std::uint64_t>(in));
    Shape shape;
    switch (rank) {
      case 1: shape = {dims[0]}; break;
      case 2: shape = {dims[0], dims[1]}; break;
      case 3: shape = {dims[0], dims[1], dims[2]}; break;
      default: shape = {dims[0], dims[1], dims[2], dims[3]}; break;
    }
    Tensor<float> t(shape);
    read_bytes(in, t.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
    loaded.emplace_back(std::move(name), std::move(t));
  }

  // Rebuild in canonical order, validating the exact expected set.
  const auto expected = expected_shapes(ckpt.config);
  if (loaded.size() != expected.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(loaded.size()) +
                          " tensors, config requires " + std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    auto it = std::find_if(loaded.begin(), loaded.end(),
                           [&](const auto& e) { return e.first == name; });
    if (it == loaded.end()) throw CheckpointError("checkpoint is missing tensor " + name);
    if (it->second.shape() != shape) {
      throw CheckpointError("tensor " + name + " has shape " + it->second.shape().str() +
                            ", config requires " + shape.str());
    }
    ckpt.weights.tensors.emplace_back(name, std::move(it->second));
  }
  if (!ckpt.weights.all_finite()) {
    throw CheckpointError("checkpoint holds non-finite weights");
  }
  return ckpt;
}

}  // namespace p2pi::model
