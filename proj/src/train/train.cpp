#include "p2pi/train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "p2pi/common/csv.hpp"
#include "p2pi/common/error.hpp"
#include "p2pi/numerics/rng.hpp"
#include "p2pi/numerics/tape.hpp"

namespace p2pi::train {

using numerics::RngStream;
using numerics::Tape;
using numerics::Tensor;

json SchedulerConfig::to_json() const {
  return {{"factor", factor}, {"patience", patience},
          {"threshold", threshold}, {"min_lr", min_lr}};
}

SchedulerConfig SchedulerConfig::from_json(const json& j) {
  SchedulerConfig c;
  c.factor = json_get<double>(j, "factor", c.factor);
  c.patience = json_get<int>(j, "patience", c.patience);
  c.threshold = json_get<double>(j, "threshold", c.threshold);
  c.min_lr = json_get<double>(j, "min_lr", c.min_lr);
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ParameterError("learning rate must be positive");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch < 1) throw ParameterError("batch size must be >= 1");
  if (!(split > 0 && split < 1)) throw ParameterError("split must lie in (0, 1)");
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (weight_decay < 0) throw ParameterError("weight decay must be >= 0");
  if (scheduler.factor <= 0 || scheduler.factor >= 1) {
    throw ParameterError("scheduler factor must lie in (0, 1)");
  }
  if (scheduler.patience < 1) throw ParameterError("scheduler patience must be >= 1");
}

json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"weight_decay", weight_decay},
          {"epochs", epochs},
          {"batch", batch},
          {"split", split},
          {"stride", stride},
          {"clip_norm", clip_norm},
          {"timing", timing},
          {"seed", seed},
          {"with_derivatives", with_derivatives},
          {"scheduler", scheduler.to_json()}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.lr = json_get<double>(j, "lr", c.lr);
  c.weight_decay = json_get<double>(j, "weight_decay", c.weight_decay);
  c.epochs = json_get<int>(j, "epochs", c.epochs);
  c.batch = json_get<int>(j, "batch", c.batch);
  c.split = json_get<double>(j, "split", c.split);
  c.stride = json_get<int>(j, "stride", c.stride);
  c.clip_norm = json_get<double>(j, "clip_norm", c.clip_norm);
  c.timing = json_get<bool>(j, "timing", c.timing);
  c.seed = json_get<std::uint64_t>(j, "seed", c.seed);
  c.with_derivatives = json_get<bool>(j, "with_derivatives", c.with_derivatives);
  if (j.contains("scheduler")) c.scheduler = SchedulerConfig::from_json(j.at("scheduler"));
  c.validate();
  return c;
}

double TrainHistory::best_val_loss() const {
  if (best_epoch < 1 || best_epoch > static_cast<int>(epochs.size())) {
    throw DataError("history has no best epoch");
  }
  return epochs[best_epoch - 1].val_loss;
}

json TrainHistory::to_json() const {
  json rows = json::array();
  for (const EpochStats& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"val_loss", e.val_loss},
                    {"lr", e.lr},
                    {"seconds", e.seconds}});
  }
  json j = {{"epochs", rows}, {"best_epoch", best_epoch}, {"aborted", aborted}};
  if (aborted) j["abort_reason"] = abort_reason;
  return j;
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,lr,seconds\n";
  for (const EpochStats& e : epochs) {
    out += std::to_string(e.epoch);
    out += ',';
    out += format_double(e.train_loss);
    out += ',';
    out += format_double(e.val_loss);
    out += ',';
    out += format_double(e.lr);
    out += ',';
    out += format_double(e.seconds);
    out += '\n';
  }
  return out;
}

TrainHistory TrainHistory::from_json(const json& j) {
  TrainHistory h;
  for (const json& row : j.at("epochs")) {
    EpochStats e;
    e.epoch = row.at("epoch").get<int>();
    e.train_loss = row.at("train_loss").get<double>();
    e.val_loss = row.at("val_loss").get<double>();
    e.lr = row.at("lr").get<double>();
    e.seconds = json_get<double>(row, "seconds", 0.0);
    h.epochs.push_back(e);
  }
  h.best_epoch = json_get<int>(j, "best_epoch", 0);
  h.aborted = json_get<bool>(j, "aborted", false);
  h.abort_reason = json_get<std::string>(j, "abort_reason", "");
  return h;
}

template <typename T>
LossValue<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("loss shapes differ: " + pred.shape().str() + " vs " +
                     target.shape().str());
  }
  const double n = static_cast<double>(pred.size());
  LossValue<T> out;
  out.grad = Tensor<T>(pred.shape());
  double sum = 0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    out.grad[i] = static_cast<T>(2.0 * d / n);
  }
  out.value = sum / n;
  return out;
}

template LossValue<float> mse_loss<float>(const Tensor<float>&, const Tensor<float>&);
template LossValue<double> mse_loss<double>(const Tensor<double>&, const Tensor<double>&);

ParamSet ParamSet::from_weights(const model::ModelWeights& w) {
  ParamSet p;
  for (const auto& [name, t] : w.tensors) {
    p.names.push_back(name);
    p.values.push_back(t.cast<double>());
    p.decay.push_back(t.shape().rank() == 2 ? 1 : 0);
  }
  return p;
}

model::ModelWeights ParamSet::to_weights() const {
  model::ModelWeights w;
  for (std::size_t i = 0; i < values.size(); ++i) {
    w.tensors.emplace_back(names[i], values[i].cast<float>());
  }
  return w;
}

OptimizerState OptimizerState::init(const ParamSet& params) {
  OptimizerState s;
  for (const auto& t : params.values) {
    s.m.emplace_back(numerics::Tensor<double>(t.shape()));
    s.v.emplace_back(numerics::Tensor<double>(t.shape()));
  }
  return s;
}

void adamw_step(ParamSet& params, const std::vector<Tensor<double>>& grads,
                OptimizerState& state, double lr, double weight_decay) {
  if (grads.size() != params.values.size()) {
    throw ShapeError("gradient count does not match parameter count");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != params.values[i].shape()) {
      throw ShapeError("gradient shape mismatch for " + params.names[i]);
    }
    if (!grads[i].all_finite()) {
      throw NumericError("non-finite gradient for " + params.names[i] +
                         ", step aborted");
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Tensor<double>& w = params.values[i];
    Tensor<double>& m = state.m[i];
    Tensor<double>& v = state.v[i];
    const Tensor<double>& g = grads[i];
    const bool decay = params.decay[i] != 0;
    for (std::int64_t k = 0; k < w.size(); ++k) {
      double wk = w[k];
      if (decay) wk -= lr * weight_decay * wk;
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] = wk - lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double clip_gradients(std::vector<Tensor<double>>& grads, double max_norm) {
  double sq = 0;
  for (const auto& g : grads) {
    for (double v : g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g) v *= scale;
    }
  }
  return norm;
}

PlateauScheduler::PlateauScheduler(const SchedulerConfig& cfg, double initial_lr)
    : cfg_(cfg), lr_(initial_lr) {}

double PlateauScheduler::observe(double val_loss) {
  const bool improved =
      !seen_any_ || val_loss < best_ * (1.0 - cfg_.threshold);
  if (improved) {
    best_ = val_loss;
    seen_any_ = true;
    bad_count_ = 0;
  } else {
    bad_count_ += 1;
    if (bad_count_ >= cfg_.patience) {
      lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
      bad_count_ = 0;
    }
  }
  return lr_;
}

std::vector<WindowRef> enumerate_windows(const std::vector<Recording>& recs, int window,
                                         int stride) {
  if (window < 1 || stride < 1) throw ParameterError("window and stride must be >= 1");
  std::vector<WindowRef> out;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const Recording& rec = recs[r];
    if (rec.features.frames() != rec.targets.frames()) {
      throw AlignmentError("recording " + std::to_string(r) +
                           ": feature and target frame counts differ");
    }
    const std::size_t n = rec.features.frames();
    for (std::size_t o = 0; o + static_cast<std::size_t>(window) <= n;
         o += static_cast<std::size_t>(stride)) {
      out.push_back({static_cast<int>(r), o});
    }
  }
  return out;
}

SplitWindows split_dataset(const std::vector<Recording>& recs,
                           const std::vector<WindowRef>& windows, int window,
                           double ratio) {
  if (!(ratio > 0 && ratio < 1)) throw ParameterError("split ratio must lie in (0, 1)");
  if (windows.size() < 2) throw DataError("need at least two windows to split");

  std::vector<std::size_t> boundary(recs.size());
  for (std::size_t r = 0; r < recs.size(); ++r) {
    boundary[r] = static_cast<std::size_t>(
        std::floor(static_cast<double>(recs[r].features.frames()) * ratio));
  }

  SplitWindows out;
  std::vector<std::size_t> train_per(recs.size(), 0), val_per(recs.size(), 0);
  for (const WindowRef& w : windows) {
    const std::size_t end = w.offset + static_cast<std::size_t>(window);
    if (end <= boundary[w.recording]) {
      out.train.push_back(w);
      ++train_per[w.recording];
    } else if (w.offset >= boundary[w.recording]) {
      out.val.push_back(w);
      ++val_per[w.recording];
    } else {
      ++out.dropped;
    }
  }
  for (std::size_t r = 0; r < recs.size(); ++r) {
    if (train_per[r] == 0 || val_per[r] == 0) {
      throw DataError("recording " + std::to_string(r) +
                      " is too short to hold both train and validation windows");
    }
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> gather_windows(const std::vector<Recording>& recs,
                         const std::vector<WindowRef>& refs, std::size_t first,
                         std::size_t count, int window, bool targets) {
  const core::Series& probe =
      targets ? recs[refs[first].recording].targets : recs[refs[first].recording].features;
  Tensor<T> out({static_cast<std::int64_t>(count), window, probe.width()});
  std::int64_t cursor = 0;
  for (std::size_t i = first; i < first + count; ++i) {
    const Recording& rec = recs[refs[i].recording];
    const core::Series& src = targets ? rec.targets : rec.features;
    for (int f = 0; f < window; ++f) {
      auto row = src.row(refs[i].offset + static_cast<std::size_t>(f));
      for (int c = 0; c < src.width(); ++c) out[cursor++] = static_cast<T>(row[c]);
    }
  }
  return out;
}

template <typename T>
TrainHistory fit_impl(const std::vector<Recording>& recs, const model::ModelConfig& mcfg,
                      const TrainConfig& tcfg, const preprocess::ChannelStats& stats,
                      const model::TargetScaler& scaler,
                      const std::filesystem::path& checkpoint_path,
                      const std::function<void(const EpochStats&)>& on_epoch) {
  for (std::size_t r = 0; r < recs.size(); ++r) {
    if (recs[r].features.width() != mcfg.input_width) {
      throw ShapeError("recording " + std::to_string(r) + " feature width " +
                       std::to_string(recs[r].features.width()) +
                       " does not match model input width " +
                       std::to_string(mcfg.input_width));
    }
    if (recs[r].targets.width() != mcfg.output_width) {
      throw ShapeError("recording " + std::to_string(r) + " target width " +
                       std::to_string(recs[r].targets.width()) +
                       " does not match model output width " +
                       std::to_string(mcfg.output_width));
    }
  }
  const auto wins = enumerate_windows(recs, mcfg.window, tcfg.stride);
  SplitWindows split = split_dataset(recs, wins, mcfg.window, tcfg.split);

  ParamSet master = ParamSet::from_weights(model::init(mcfg));
  OptimizerState opt = OptimizerState::init(master);
  PlateauScheduler sched(tcfg.scheduler, tcfg.lr);
  TrainHistory hist;
  double best_val = std::numeric_limits<double>::infinity();
  const std::size_t batch = static_cast<std::size_t>(tcfg.batch);

  auto eval_loss = [&](const std::vector<WindowRef>& refs) {
    const model::ModelWeights weights = master.to_weights();
    double sum = 0;
    RngStream unused(0, 0);
    for (std::size_t first = 0; first < refs.size(); first += batch) {
      const std::size_t count = std::min(batch, refs.size() - first);
      Tape<T> tape;
      std::vector<typename Tape<T>::Var> vars;
      for (std::size_t i = 0; i < master.values.size(); ++i) {
        if constexpr (std::is_same_v<T, double>) {
          vars.push_back(tape.input(master.values[i]));
        } else {
          vars.push_back(tape.input(weights.tensors[i].second.template cast<T>()));
        }
      }
      auto feats = gather_windows<T>(recs, refs, first, count, mcfg.window, false);
      auto targs = gather_windows<T>(recs, refs, first, count, mcfg.window, true);
      auto out = model::forward<T>(tape, mcfg, vars, tape.input(std::move(feats)), false,
                                   unused);
      sum += mse_loss<T>(tape.value(out), targs).value * static_cast<double>(count);
    }
    return sum / static_cast<double>(refs.size());
  };

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr_used = sched.lr();

    std::vector<WindowRef> order = split.train;
    RngStream shuffle_rng(tcfg.seed, 2 * static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }

    RngStream dropout_rng(tcfg.seed, 2 * static_cast<std::uint64_t>(epoch) + 1);
    double train_sum = 0;
    try {
      for (std::size_t first = 0; first < order.size(); first += batch) {
        const std::size_t count = std::min(batch, order.size() - first);
        Tape<T> tape;
        std::vector<typename Tape<T>::Var> vars;
        vars.reserve(master.values.size());
        for (const auto& t : master.values) {
          vars.push_back(tape.param(t.template cast<T>()));
        }
        auto feats = gather_windows<T>(recs, order, first, count, mcfg.window, false);
        auto targs = gather_windows<T>(recs, order, first, count, mcfg.window, true);
        auto out = model::forward<T>(tape, mcfg, vars, tape.input(std::move(feats)), true,
                                     dropout_rng);
        LossValue<T> loss = mse_loss<T>(tape.value(out), targs);
        train_sum += loss.value * static_cast<double>(count);
        tape.backward_seed(out, std::move(loss.grad));

        std::vector<Tensor<double>> grads;
        grads.reserve(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) {
          const Tensor<T>& g = tape.grad(vars[i]);
          if (g.empty()) {
            grads.emplace_back(Tensor<double>(master.values[i].shape()));
          } else {
            grads.push_back(g.template cast<double>());
          }
        }
        clip_gradients(grads, tcfg.clip_norm);
        adamw_step(master, grads, opt, lr_used, tcfg.weight_decay);
      }

      EpochStats e;
      e.epoch = epoch;
      e.train_loss = train_sum / static_cast<double>(order.size());
      e.val_loss = eval_loss(split.val);
      e.lr = lr_used;
      if (tcfg.timing) {
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
      }
      hist.epochs.push_back(e);
      if (on_epoch) on_epoch(e);

      if (e.val_loss < best_val) {
        best_val = e.val_loss;
        hist.best_epoch = epoch;
        model::Checkpoint ckpt;
        ckpt.config = mcfg;
        ckpt.stats = stats;
        ckpt.target_scaler = scaler;
        ckpt.weights = master.to_weights();
        model::save_checkpoint(checkpoint_path, ckpt);
      }
      sched.observe(e.val_loss);
    } catch (const NumericError& e) {
      hist.aborted = true;
      hist.abort_reason = e.what();
      break;
    }
  }
  return hist;
}

}  // namespace

TrainHistory fit(const std::vector<Recording>& recs, const model::ModelConfig& mcfg,
                 const TrainConfig& tcfg, const preprocess::ChannelStats& stats,
                 const model::TargetScaler& scaler,
                 const std::filesystem::path& checkpoint_path,
                 const std::function<void(const EpochStats&)>& on_epoch) {
  mcfg.validate();
  tcfg.validate();
  if (recs.empty()) throw DataError("no recordings to train on");
  if (mcfg.precision == "f64") {
    return fit_impl<double>(recs, mcfg, tcfg, stats, scaler, checkpoint_path, on_epoch);
  }
  return fit_impl<float>(recs, mcfg, tcfg, stats, scaler, checkpoint_path, on_epoch);
}

}  // namespace p2pi::train
