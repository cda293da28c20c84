#include "p2pi/cli/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "p2pi/common/csv.hpp"
#include "p2pi/common/error.hpp"
#include "p2pi/common/hash.hpp"
#include "p2pi/eval/eval.hpp"
#include "p2pi/ingest/ingest.hpp"
#include "p2pi/model/model.hpp"
#include "p2pi/preprocess/artifacts.hpp"
#include "p2pi/preprocess/preprocess.hpp"
#include "p2pi/synth/synth.hpp"
#include "p2pi/train/train.hpp"

namespace p2pi::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

/// P2PI_OUT_ROOT rebases relative output paths; absolute paths win.
fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("P2PI_OUT_ROOT")) {
    if (*root != '\0') return fs::path(root) / p;
  }
  return p;
}

std::string digest_of(const json& j) { return hex64(fnv1a64(j.dump())); }

json RunManifest_to_json(const RunManifest& m) {
  return json{{"command", m.command},       {"config", m.config},
              {"inputs", m.inputs},         {"outputs", m.outputs},
              {"seeds", m.seeds},           {"config_hash", m.config_hash},
              {"tool_version", m.tool_version}, {"wall_seconds", m.wall_seconds}};
}

void write_run_manifest(RunManifest m, const fs::path& dir, Clock::time_point t0) {
  m.config_hash = digest_of(m.config);
  m.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_json((dir / "run_manifest.json").string(), m.to_json());
}

/// Config files are operator input: a missing file is a configuration
/// mistake, not an I/O fault, so it maps to exit 2 and names the path.
json load_config_file(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return load_json(path);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("short write to " + path.string());
}

/// Pipeline stages keep their own error category for I/O but everything else
/// is reported as a processing failure with the stage named.
template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const IoError& e) {
    throw IoError(name + ": " + e.what());
  } catch (const Error& e) {
    throw DataError(name + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces

std::size_t train_boundary(std::size_t frames, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(frames) * ratio));
}

/// (x - mean) / std per coordinate; the inverse lives in model::predict_series.
core::Series standardize_targets(const core::Series& skeleton,
                                 const model::TargetScaler& scaler) {
  core::Series out(skeleton.width());
  out.meta = skeleton.meta;
  std::vector<double> row(skeleton.width());
  for (std::size_t i = 0; i < skeleton.frames(); ++i) {
    const auto src = skeleton.row(i);
    for (int c = 0; c < skeleton.width(); ++c) {
      row[c] = (src[c] - scaler.mean[c]) / scaler.stddev[c];
    }
    out.push_back(skeleton.time(i), row);
  }
  return out;
}

/// Artifact problems are compatibility failures from the consumer's point of
/// view (exit 5); only plain I/O keeps exit 3.
preprocess::DatasetArtifacts load_artifacts_compat(const std::string& dir) {
  try {
    return preprocess::load_artifacts(resolve_out(dir));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("artifacts at ") + dir + ": " + e.what());
  }
}

void check_width_match(int expected, int actual, const std::string& what) {
  if (expected != actual) {
    throw CheckpointError(what + ": expected width " + std::to_string(expected) +
                          ", found " + std::to_string(actual));
  }
}

model::ModelConfig resolve_model_config(const std::string& config_path,
                                        const std::string& preset,
                                        const preprocess::DatasetArtifacts& artifacts) {
  model::ModelConfig mcfg;
  if (!config_path.empty()) {
    mcfg = model::ModelConfig::from_json(load_config_file(config_path));
  } else if (preset == "full") {
    mcfg = model::ModelConfig::full_preset(artifacts.with_derivatives);
  } else if (preset == "desk") {
    mcfg = model::ModelConfig::desk_preset(artifacts.with_derivatives);
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or full)");
  }
  check_width_match(mcfg.input_width, artifacts.feature_width(), "model input vs artifacts");
  check_width_match(mcfg.output_width, artifacts.target_width(), "model output vs artifacts");
  return mcfg;
}

struct TrainedArtifacts {
  train::TrainHistory history;
  fs::path checkpoint;
};

TrainedArtifacts train_on_artifacts(const preprocess::DatasetArtifacts& artifacts,
                                    const model::ModelConfig& mcfg,
                                    const train::TrainConfig& tcfg, const fs::path& out,
                                    bool quiet) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

  // Target scaling is fitted on the leading (training) fraction only, like
  // the sensor stats, and rides along in the checkpoint.
  std::vector<core::Series> train_slices;
  train_slices.reserve(artifacts.recordings.size());
  for (const auto& rec : artifacts.recordings) {
    const std::size_t boundary = train_boundary(rec.skeleton.frames(), tcfg.split);
    if (boundary == 0) {
      throw DataError("recording " + rec.name + " has no training frames at split " +
                      format_double(tcfg.split));
    }
    train_slices.push_back(rec.skeleton.slice(0, boundary));
  }
  std::vector<const core::Series*> parts;
  for (const auto& s : train_slices) parts.push_back(&s);
  const model::TargetScaler scaler = model::fit_target_scaler(parts);

  std::vector<train::Recording> recs;
  recs.reserve(artifacts.recordings.size());
  for (const auto& rec : artifacts.recordings) {
    recs.push_back({rec.features, standardize_targets(rec.skeleton, scaler)});
  }

  const fs::path ckpt_path = out / "checkpoint.bin";
  auto on_epoch = [&](const train::EpochStats& e) {
    if (quiet) return;
    std::cout << "epoch " << e.epoch << "  train " << format_double(e.train_loss)
              << "  val " << format_double(e.val_loss) << "  lr " << format_double(e.lr)
              << "\n";
  };
  train::TrainHistory hist =
      train::fit(recs, mcfg, tcfg, artifacts.stats, scaler, ckpt_path, on_epoch);

  write_text_file(out / "history.csv", hist.to_csv());
  save_json((out / "history.json").string(), hist.to_json());
  return {std::move(hist), ckpt_path};
}

/// Validation-side error matrix: predictions on each recording, trailing
/// (1 - split) fraction only, frames labeled by the recording's task.
std::pair<eval::JointErrorMatrix, std::vector<core::TaskLabel>> evaluate_checkpoint(
    const model::Checkpoint& ckpt, const preprocess::DatasetArtifacts& artifacts,
    double split_ratio) {
  check_width_match(ckpt.config.input_width, artifacts.feature_width(),
                    "checkpoint input vs artifacts");
  eval::JointErrorMatrix total;
  std::vector<core::TaskLabel> labels;
  for (const auto& rec : artifacts.recordings) {
    const std::size_t frames = rec.features.frames();
    const std::size_t boundary = train_boundary(frames, split_ratio);
    if (boundary >= frames) continue;  // no validation frames in this recording
    const core::SkeletonSeries pred = model::predict_series(
        ckpt.weights, ckpt.config, rec.features, ckpt.target_scaler);
    const eval::JointErrorMatrix part = eval::joint_errors(pred.slice(boundary, frames),
                                                           rec.skeleton.slice(boundary, frames));
    total.values.insert(total.values.end(), part.values.begin(), part.values.end());
    total.frames += part.frames;
    labels.insert(labels.end(), part.frames, rec.task);
  }
  if (total.frames == 0) {
    throw DataError("no validation frames at split " + format_double(split_ratio));
  }
  return {std::move(total), std::move(labels)};
}

void write_report_files(const eval::ErrorReport& report, const fs::path& out) {
  write_text_file(out / "task_report.csv", report.tasks.csv());
  write_text_file(out / "part_report.csv", report.parts.csv());
  save_json((out / "report.json").string(), report.to_json());
  write_text_file(out / "report.svg", report.svg());
}

void write_skeleton_csv(const fs::path& path, const core::SkeletonSeries& skel) {
  std::string text = "t";
  for (int j = 0; j < core::kJointCount; ++j) {
    const auto name = core::joint_name(static_cast<core::JointId>(j));
    for (const char* axis : {".x", ".y", ".z"}) {
      text += ',';
      text += name;
      text += axis;
    }
  }
  text += '\n';
  for (std::size_t i = 0; i < skel.frames(); ++i) {
    text += format_double(skel.time(i));
    for (int c = 0; c < core::kSkeletonWidth; ++c) {
      text += ',';
      text += format_double(skel.at(i, c));
    }
    text += '\n';
  }
  write_text_file(path, text);
}

/// Ingest one raw recording through the sensor-side chain: read both feet,
/// zero-fill, optionally swap in the standalone ankle IMU, merge, smooth.
core::SensorSeries sensor_chain(const fs::path& raw, const synth::RecordingFiles& rec,
                                const ingest::AmplifierParams& amp, bool standalone_imu) {
  auto left = stage("read " + rec.left, [&] {
    return ingest::read_insole_csv(raw / rec.left, core::FootSide::Left, amp).first;
  });
  auto right = stage("read " + rec.right, [&] {
    return ingest::read_insole_csv(raw / rec.right, core::FootSide::Right, amp).first;
  });
  left = preprocess::zero_fill(left);
  right = preprocess::zero_fill(right);
  if (standalone_imu) {
    const auto imu = stage("read " + rec.imu, [&] {
      return ingest::read_imu_csv(raw / rec.imu).first;
    });
    left = stage("substitute imu " + rec.imu,
                 [&] { return ingest::substitute_imu(left, imu); });
  }
  auto merged = stage("merge feet " + rec.left,
                      [&] { return ingest::merge_feet(left, right).first; });
  return stage("moving average " + rec.left,
               [&] { return preprocess::moving_average(merged, 5); });
}

}  // namespace

json RunManifest::to_json() const { return RunManifest_to_json(*this); }

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const SynthOptions& opts) {
  const auto t0 = Clock::now();
  synth::SynthConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = synth::SynthConfig::from_json(load_config_file(opts.config_path));
  }
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.duration_override > 0) cfg.duration_s = opts.duration_override;
  if (!opts.tasks_override.empty()) {
    cfg.tasks.clear();
    std::size_t start = 0;
    const std::string& list = opts.tasks_override;
    while (start <= list.size()) {
      const std::size_t comma = list.find(',', start);
      const std::string id = list.substr(start, comma - start);
      if (!id.empty()) {
        try {
          cfg.tasks.push_back(core::task_from_id(id));
        } catch (const FormatError& e) {
          throw ConfigError(e.what());
        }
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  cfg.validate();

  const fs::path out = resolve_out(opts.out_dir);
  const synth::SynthManifest manifest = synth::emit_dataset(cfg, out);
  std::cout << "wrote " << manifest.recordings.size() << " recordings to " << out.string()
            << "\n";

  RunManifest rm;
  rm.command = "synth";
  rm.config = cfg.to_json();
  if (!opts.config_path.empty()) rm.inputs.push_back(opts.config_path);
  rm.outputs.push_back(out.string());
  rm.seeds.push_back(cfg.seed);
  write_run_manifest(std::move(rm), out, t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// preprocess

int cmd_preprocess(const PreprocessOptions& opts) {
  const auto t0 = Clock::now();
  if (!(opts.split_ratio > 0.0 && opts.split_ratio < 1.0)) {
    throw ConfigError("split ratio must be in (0, 1)");
  }
  const fs::path raw = resolve_out(opts.raw_dir);
  const fs::path out = resolve_out(opts.out_dir);
  const synth::SynthManifest manifest = synth::load_manifest(raw / "manifest.json");
  const synth::SynthConfig source_cfg = synth::SynthConfig::from_json(manifest.config);

  preprocess::DatasetArtifacts artifacts;
  artifacts.with_derivatives = opts.with_derivatives;
  artifacts.split_ratio = opts.split_ratio;
  artifacts.source_hashes = manifest.hashes;

  // First pass: sensor and skeleton series per recording, synchronized on the
  // 0.01 s grid. Statistics wait until all training portions are known.
  struct Synced {
    std::string name;
    core::TaskLabel task;
    preprocess::SyncedDataset data;
  };
  std::vector<Synced> synced;
  for (const synth::RecordingFiles& rec : manifest.recordings) {
    const core::SensorSeries sensor =
        sensor_chain(raw, rec, source_cfg.amplifier, opts.standalone_imu);
    const core::SensorSeries sensor_grid =
        stage("resample sensors " + rec.left, [&] { return preprocess::resample(sensor); });

    const auto mocap = stage("read " + rec.mocap, [&] {
      return ingest::read_mocap_csv(raw / rec.mocap);
    });
    const double mocap_rate = mocap.second.detected_rate_hz > 0
                                  ? mocap.second.detected_rate_hz
                                  : source_cfg.mocap_rate_hz;
    const auto segments = stage("interpolate gaps " + rec.mocap, [&] {
      return preprocess::interpolate_gaps(mocap.first, 30);
    });
    if (segments.empty()) {
      throw DataError("interpolate gaps " + rec.mocap + ": no usable segments");
    }
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto filtered = stage("lowpass " + rec.mocap, [&] {
        return preprocess::lowpass(segments[s], 6.0, mocap_rate);
      });
      const auto skel_grid = stage("resample mocap " + rec.mocap, [&] {
        return preprocess::resample(filtered);
      });
      auto sync = stage("synchronize " + rec.mocap, [&] {
        return preprocess::synchronize(sensor_grid, skel_grid);
      });
      std::string name(core::task_id(rec.task));
      if (segments.size() > 1) name += "_" + std::to_string(s);
      synced.push_back({std::move(name), rec.task, std::move(sync)});
    }
  }
  if (synced.empty()) throw DataError("raw dataset produced no synchronized recordings");

  // Channel statistics come from the leading training fraction of every
  // recording, pooled, so the validation tail never leaks into the scaling.
  std::vector<core::Series> train_slices;
  train_slices.reserve(synced.size());
  for (const Synced& s : synced) {
    const std::size_t boundary = train_boundary(s.data.features.frames(), opts.split_ratio);
    if (boundary == 0) {
      throw DataError("recording " + s.name + " has no training frames at split " +
                      format_double(opts.split_ratio));
    }
    train_slices.push_back(s.data.features.slice(0, boundary));
  }
  std::vector<const core::Series*> parts;
  for (const auto& s : train_slices) parts.push_back(&s);
  artifacts.stats = stage("fit stats", [&] { return preprocess::fit_stats(parts); });

  for (Synced& s : synced) {
    const core::Series norm = stage("standardize " + s.name, [&] {
      return preprocess::normalize_standardize(s.data.features, artifacts.stats);
    });
    preprocess::ArtifactRecording rec;
    rec.name = s.name;
    rec.task = s.task;
    rec.first_index = std::llround(s.data.features.time(0) / artifacts.grid_period);
    rec.features = stage("build features " + s.name, [&] {
      return preprocess::build_features(norm, opts.with_derivatives);
    });
    rec.skeleton = std::move(s.data.skeleton);
    artifacts.recordings.push_back(std::move(rec));
  }

  // The artifact hash covers only the transformation, not where the raw data
  // happened to live; the raw identity is already in source_hashes. Reruns
  // into different directories therefore stay byte-identical.
  json resolved{{"with_derivatives", opts.with_derivatives},
                {"standalone_imu", opts.standalone_imu},
                {"split_ratio", opts.split_ratio}};
  artifacts.config_hash = digest_of(resolved);
  resolved["raw_dir"] = opts.raw_dir;
  preprocess::save_artifacts(artifacts, out);
  std::cout << "wrote " << artifacts.recordings.size() << " recordings, feature width "
            << artifacts.feature_width() << ", to " << out.string() << "\n";

  RunManifest rm;
  rm.command = "preprocess";
  rm.config = resolved;
  rm.inputs.push_back(raw.string());
  rm.outputs.push_back(out.string());
  rm.seeds.push_back(manifest.seed);
  write_run_manifest(std::move(rm), out, t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const TrainOptions& opts) {
  const auto t0 = Clock::now();
  const preprocess::DatasetArtifacts artifacts = load_artifacts_compat(opts.artifacts_dir);
  model::ModelConfig mcfg =
      resolve_model_config(opts.model_config_path, opts.preset, artifacts);

  train::TrainConfig tcfg;
  if (!opts.train_config_path.empty()) {
    tcfg = train::TrainConfig::from_json(load_config_file(opts.train_config_path));
  }
  tcfg.with_derivatives = artifacts.with_derivatives;
  if (opts.seed_set) {
    tcfg.seed = opts.seed;
    mcfg.seed = opts.seed;
  }
  if (opts.epochs_override > 0) tcfg.epochs = opts.epochs_override;
  if (opts.lr_override > 0) tcfg.lr = opts.lr_override;
  if (opts.batch_override > 0) tcfg.batch = opts.batch_override;
  if (!opts.precision_override.empty()) mcfg.precision = opts.precision_override;
  mcfg.validate();
  tcfg.validate();

  const fs::path out = resolve_out(opts.out_dir);
  const TrainedArtifacts trained =
      train_on_artifacts(artifacts, mcfg, tcfg, out, opts.quiet);

  RunManifest rm;
  rm.command = "train";
  rm.config = json{{"model", mcfg.to_json()}, {"train", tcfg.to_json()},
                   {"artifacts", opts.artifacts_dir}};
  rm.inputs.push_back(opts.artifacts_dir);
  rm.outputs.push_back(trained.checkpoint.string());
  rm.outputs.push_back((out / "history.csv").string());
  rm.seeds.push_back(tcfg.seed);
  write_run_manifest(std::move(rm), out, t0);

  if (trained.history.aborted) {
    throw NumericError("training aborted: " + trained.history.abort_reason);
  }
  if (!opts.quiet) {
    std::cout << "best epoch " << trained.history.best_epoch << "  val "
              << format_double(trained.history.best_val_loss()) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const EvalOptions& opts) {
  const auto t0 = Clock::now();
  if (!(opts.split_ratio > 0.0 && opts.split_ratio < 1.0)) {
    throw ConfigError("split ratio must be in (0, 1)");
  }
  const model::Checkpoint ckpt = model::load_checkpoint(resolve_out(opts.checkpoint_path));
  const preprocess::DatasetArtifacts artifacts = load_artifacts_compat(opts.artifacts_dir);

  auto [matrix, labels] = evaluate_checkpoint(ckpt, artifacts, opts.split_ratio);
  const eval::ErrorReport report = eval::build_report(matrix, labels);

  const fs::path out = resolve_out(opts.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  write_report_files(report, out);
  std::cout << "overall rmse " << format_double(report.tasks.overall_rmse) << " mm over "
            << matrix.frames << " validation frames\n";

  RunManifest rm;
  rm.command = "eval";
  rm.config = json{{"checkpoint", opts.checkpoint_path},
                   {"artifacts", opts.artifacts_dir},
                   {"split_ratio", opts.split_ratio}};
  rm.inputs = {opts.checkpoint_path, opts.artifacts_dir};
  rm.outputs = {(out / "task_report.csv").string(), (out / "part_report.csv").string(),
                (out / "report.json").string(), (out / "report.svg").string()};
  write_run_manifest(std::move(rm), out, t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// ablate

int cmd_ablate(const AblateOptions& opts) {
  const auto t0 = Clock::now();
  if (opts.seed_without != opts.seed_with) {
    throw GuardError("fair comparison requires identical seeds in both arms (got " +
                     std::to_string(opts.seed_without) + " and " +
                     std::to_string(opts.seed_with) + ")");
  }
  const preprocess::DatasetArtifacts without = load_artifacts_compat(opts.without_dir);
  const preprocess::DatasetArtifacts with = load_artifacts_compat(opts.with_dir);

  // Both arms must descend from the same raw files.
  auto sorted_hashes = [](const preprocess::DatasetArtifacts& a) {
    auto h = a.source_hashes;
    std::sort(h.begin(), h.end());
    return h;
  };
  if (sorted_hashes(without) != sorted_hashes(with)) {
    throw GuardError("raw-data hash mismatch between the two artifact sets; "
                     "both arms must be preprocessed from the same dataset");
  }

  train::TrainConfig tcfg;
  if (!opts.train_config_path.empty()) {
    tcfg = train::TrainConfig::from_json(load_config_file(opts.train_config_path));
  }
  tcfg.seed = opts.seed_without;
  const fs::path out = resolve_out(opts.out_dir);

  auto run_arm = [&](const preprocess::DatasetArtifacts& artifacts,
                     const std::string& label) {
    model::ModelConfig mcfg = resolve_model_config("", opts.preset, artifacts);
    mcfg.seed = tcfg.seed;
    train::TrainConfig arm_cfg = tcfg;
    arm_cfg.with_derivatives = artifacts.with_derivatives;
    const TrainedArtifacts trained =
        train_on_artifacts(artifacts, mcfg, arm_cfg, out / label, opts.quiet);
    const model::Checkpoint ckpt = model::load_checkpoint(trained.checkpoint);
    auto [matrix, labels] = evaluate_checkpoint(ckpt, artifacts, opts.split_ratio);
    return eval::per_task_report(matrix, labels);
  };

  const eval::TaskReport report_without = run_arm(without, "without");
  const eval::TaskReport report_with = run_arm(with, "with");
  const eval::AblationTable table = eval::ablation_compare(report_without, report_with);

  write_text_file(out / "ablation.csv", table.csv());
  save_json((out / "ablation.json").string(), table.to_json());
  write_text_file(out / "ablation.svg", table.svg());
  std::cout << "ablation rmse: " << table.label_a << " "
            << format_double(report_without.overall_rmse) << " mm, " << table.label_b << " "
            << format_double(report_with.overall_rmse) << " mm\n";

  RunManifest rm;
  rm.command = "ablate";
  rm.config = json{{"without", opts.without_dir}, {"with", opts.with_dir},
                   {"train", tcfg.to_json()},     {"preset", opts.preset},
                   {"split_ratio", opts.split_ratio}};
  rm.inputs = {opts.without_dir, opts.with_dir};
  rm.outputs = {(out / "ablation.csv").string(), (out / "ablation.json").string(),
                (out / "ablation.svg").string()};
  rm.seeds = {opts.seed_without, opts.seed_with};
  write_run_manifest(std::move(rm), out, t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const PredictOptions& opts) {
  const auto t0 = Clock::now();
  const model::Checkpoint ckpt = model::load_checkpoint(resolve_out(opts.checkpoint_path));
  if (ckpt.stats.width() == 0) {
    throw CheckpointError("checkpoint carries no channel statistics; cannot preprocess raw input");
  }
  const bool with_derivatives = ckpt.config.input_width == 3 * ckpt.stats.width();
  if (!with_derivatives && ckpt.config.input_width != ckpt.stats.width()) {
    throw CheckpointError("checkpoint input width " + std::to_string(ckpt.config.input_width) +
                          " does not match its statistics width " +
                          std::to_string(ckpt.stats.width()));
  }

  ingest::AmplifierParams amp;
  if (!opts.amplifier_config_path.empty()) {
    amp = ingest::AmplifierParams::from_json(load_config_file(opts.amplifier_config_path));
  }

  // sensor_chain resolves names relative to a directory; anchor on the left
  // file's parent and express the others relative to it.
  const fs::path base = fs::path(opts.left_path).parent_path();
  synth::RecordingFiles files;
  files.left = fs::path(opts.left_path).filename().string();
  files.right = fs::relative(opts.right_path, base).string();
  if (!opts.imu_path.empty()) files.imu = fs::relative(opts.imu_path, base).string();

  const core::SensorSeries sensor =
      sensor_chain(base, files, amp, !opts.imu_path.empty());
  const core::SensorSeries sensor_grid =
      stage("resample sensors", [&] { return preprocess::resample(sensor); });
  const core::Series norm = stage("standardize", [&] {
    if (ckpt.stats.width() != sensor_grid.width()) {
      throw ShapeError("checkpoint statistics width " + std::to_string(ckpt.stats.width()) +
                       " does not match sensor width " + std::to_string(sensor_grid.width()));
    }
    return preprocess::normalize_standardize(sensor_grid, ckpt.stats);
  });
  const core::Series features = stage("build features", [&] {
    return preprocess::build_features(norm, with_derivatives);
  });
  const core::SkeletonSeries pred = stage("predict", [&] {
    return model::predict_series(ckpt.weights, ckpt.config, features, ckpt.target_scaler);
  });

  const fs::path out_path = resolve_out(opts.out_path);
  if (out_path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out_path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + out_path.parent_path().string());
  }
  write_skeleton_csv(out_path, pred);
  std::cout << "wrote " << pred.frames() << " predicted frames to " << out_path.string()
            << "\n";

  RunManifest rm;
  rm.command = "predict";
  rm.config = json{{"checkpoint", opts.checkpoint_path},
                   {"left", opts.left_path},
                   {"right", opts.right_path},
                   {"imu", opts.imu_path}};
  rm.inputs = {opts.checkpoint_path, opts.left_path, opts.right_path};
  rm.outputs = {out_path.string()};
  write_run_manifest(std::move(rm), out_path.has_parent_path() ? out_path.parent_path()
                                                               : fs::path("."),
                     t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// dispatcher

int run(const std::vector<std::string>& args) {
  CLI::App app{"Insole-to-skeleton pipeline: synthesize, preprocess, train, "
               "evaluate, ablate, predict"};
  app.require_subcommand(1);

  SynthOptions synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic raw dataset");
  synth_cmd->add_option("--config", synth_opts.config_path, "Generator config JSON");
  synth_cmd->add_option("--out", synth_opts.out_dir, "Output dataset directory")->required();
  auto* synth_seed = synth_cmd->add_option("--seed", synth_opts.seed, "Override the seed");
  synth_cmd->add_option("--duration", synth_opts.duration_override,
                        "Override seconds per task");
  synth_cmd->add_option("--tasks", synth_opts.tasks_override,
                        "Comma-separated task ids to generate");

  PreprocessOptions pre_opts;
  auto* pre_cmd = app.add_subcommand("preprocess", "Raw CSVs to training artifacts");
  pre_cmd->add_option("--raw", pre_opts.raw_dir, "Raw dataset directory")->required();
  pre_cmd->add_option("--out", pre_opts.out_dir, "Artifact directory")->required();
  pre_cmd->add_flag("--derivatives", pre_opts.with_derivatives,
                    "Append first and second derivative blocks");
  pre_cmd->add_flag("--standalone-imu", pre_opts.standalone_imu,
                    "Replace left-foot IMU channels from the ankle unit file");
  pre_cmd->add_option("--split", pre_opts.split_ratio,
                      "Training fraction used for statistics");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train the encoder on artifacts");
  train_cmd->add_option("--artifacts", train_opts.artifacts_dir, "Artifact directory")
      ->required();
  train_cmd->add_option("--out", train_opts.out_dir, "Run output directory")->required();
  train_cmd->add_option("--model-config", train_opts.model_config_path, "Model config JSON");
  train_cmd->add_option("--train-config", train_opts.train_config_path,
                        "Training config JSON");
  train_cmd->add_option("--preset", train_opts.preset, "Model preset: desk or full");
  auto* train_seed = train_cmd->add_option("--seed", train_opts.seed, "Seed for init/shuffle");
  train_cmd->add_option("--epochs", train_opts.epochs_override, "Override epoch count");
  train_cmd->add_option("--lr", train_opts.lr_override, "Override learning rate");
  train_cmd->add_option("--batch", train_opts.batch_override, "Override batch size");
  train_cmd->add_option("--precision", train_opts.precision_override, "f32 or f64");
  train_cmd->add_flag("--quiet", train_opts.quiet, "Suppress per-epoch output");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Error reports on the validation split");
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint_path, "Trained checkpoint")
      ->required();
  eval_cmd->add_option("--artifacts", eval_opts.artifacts_dir, "Artifact directory")
      ->required();
  eval_cmd->add_option("--out", eval_opts.out_dir, "Report directory")->required();
  eval_cmd->add_option("--split", eval_opts.split_ratio, "Training fraction to skip");

  AblateOptions ablate_opts;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Compare derivative and plain feature sets");
  ablate_cmd->add_option("--without", ablate_opts.without_dir,
                         "Artifacts without derivatives")
      ->required();
  ablate_cmd->add_option("--with", ablate_opts.with_dir, "Artifacts with derivatives")
      ->required();
  ablate_cmd->add_option("--out", ablate_opts.out_dir, "Comparison output directory")
      ->required();
  ablate_cmd->add_option("--train-config", ablate_opts.train_config_path,
                         "Shared training config JSON");
  ablate_cmd->add_option("--preset", ablate_opts.preset, "Model preset: desk or full");
  std::uint64_t ablate_seed = 0;
  auto* ablate_seed_opt =
      ablate_cmd->add_option("--seed", ablate_seed, "Shared seed for both arms");
  ablate_cmd->add_option("--split", ablate_opts.split_ratio, "Training fraction to skip");
  bool ablate_verbose = false;
  ablate_cmd->add_flag("--verbose", ablate_verbose, "Per-epoch output for both arms");

  PredictOptions predict_opts;
  auto* predict_cmd = app.add_subcommand("predict", "Skeleton CSV from raw sensor CSVs");
  predict_cmd->add_option("--checkpoint", predict_opts.checkpoint_path, "Trained checkpoint")
      ->required();
  predict_cmd->add_option("--left", predict_opts.left_path, "Left insole CSV")->required();
  predict_cmd->add_option("--right", predict_opts.right_path, "Right insole CSV")
      ->required();
  predict_cmd->add_option("--imu", predict_opts.imu_path, "Standalone ankle IMU CSV");
  predict_cmd->add_option("--amplifier", predict_opts.amplifier_config_path,
                          "Amplifier params JSON (defaults match the generator)");
  predict_cmd->add_option("--out", predict_opts.out_path, "Output skeleton CSV")->required();

  try {
    // CLI11's vector overload consumes arguments back to front.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends print through CLI11's machinery.
      return app.exit(e);
    }
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }

  try {
    if (synth_cmd->parsed()) {
      synth_opts.seed_set = synth_seed->count() > 0;
      return cmd_synth(synth_opts);
    }
    if (pre_cmd->parsed()) return cmd_preprocess(pre_opts);
    if (train_cmd->parsed()) {
      train_opts.seed_set = train_seed->count() > 0;
      return cmd_train(train_opts);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_opts);
    if (ablate_cmd->parsed()) {
      if (ablate_seed_opt->count() > 0) {
        ablate_opts.seed_without = ablate_seed;
        ablate_opts.seed_with = ablate_seed;
      }
      ablate_opts.quiet = !ablate_verbose;
      return cmd_ablate(ablate_opts);
    }
    if (predict_cmd->parsed()) return cmd_predict(predict_opts);
    std::cerr << "error: no subcommand\n";
    return kConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const CheckpointError& e) {
    std::cerr << "compatibility error: " << e.what() << "\n";
    return kCompat;
  } catch (const GuardError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kGuard;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kProcessing;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace p2pi::cli
