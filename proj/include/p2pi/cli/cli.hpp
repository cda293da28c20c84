#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2pi/common/json_util.hpp"

namespace p2pi::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Stable process exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,     // unexpected/internal
  kConfig = 2,      // bad or missing configuration
  kIo = 3,          // filesystem failures
  kProcessing = 4,  // data/pipeline errors
  kCompat = 5,      // incompatible checkpoints or artifacts
  kGuard = 6,       // refused by a safety/fairness guard
};

/// Written once per command invocation, next to the command's outputs.
struct RunManifest {
  std::string command;
  json config;  // fully resolved configuration
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;  // digest of the resolved config text
  std::string tool_version = kToolVersion;
  double wall_seconds = 0;

  json to_json() const;
};

struct SynthOptions {
  std::string config_path;  // empty = built-in defaults
  std::string out_dir;
  bool seed_set = false;  // flag overrides win over the config file
  std::uint64_t seed = 0;
  double duration_override = 0;   // <= 0 keeps the config value
  std::string tasks_override;     // comma-separated task ids, empty keeps
};

struct PreprocessOptions {
  std::string raw_dir;
  std::string out_dir;
  bool with_derivatives = false;
  bool standalone_imu = false;  // replace left-foot IMU channels from the ankle unit file
  double split_ratio = 0.8;
};

struct TrainOptions {
  std::string artifacts_dir;
  std::string out_dir;
  std::string model_config_path;  // empty = preset
  std::string train_config_path;  // empty = defaults
  std::string preset = "desk";    // desk | full
  bool seed_set = false;
  std::uint64_t seed = 0;
  int epochs_override = 0;     // <= 0 keeps
  double lr_override = 0;      // <= 0 keeps
  int batch_override = 0;      // <= 0 keeps
  std::string precision_override;  // empty keeps
  bool quiet = false;
};

struct EvalOptions {
  std::string checkpoint_path;
  std::string artifacts_dir;
  std::string out_dir;
  double split_ratio = 0.8;  // evaluation uses the trailing validation part
};

struct AblateOptions {
  std::string without_dir;  // artifacts preprocessed without derivative features
  std::string with_dir;     // same raw data, with derivatives
  std::string out_dir;
  std::string train_config_path;  // shared by both arms
  std::string preset = "desk";
  std::uint64_t seed_without = 0;
  std::uint64_t seed_with = 0;
  double split_ratio = 0.8;
  bool quiet = true;
};

struct PredictOptions {
  std::string checkpoint_path;
  std::string left_path;
  std::string right_path;
  std::string imu_path;  // optional standalone ankle IMU
  std::string amplifier_config_path;  // optional, defaults otherwise
  std::string out_path;  // skeleton CSV
};

int cmd_synth(const SynthOptions& opts);
int cmd_preprocess(const PreprocessOptions& opts);
int cmd_train(const TrainOptions& opts);
int cmd_eval(const EvalOptions& opts);
int cmd_ablate(const AblateOptions& opts);
int cmd_predict(const PredictOptions& opts);

/// Parses argv-style arguments (without the program name), dispatches, and
/// maps exceptions to the stable exit codes above.
int run(const std::vector<std::string>& args);

}  // namespace p2pi::cli
