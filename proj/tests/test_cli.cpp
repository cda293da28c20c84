#include "p2pi/cli/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "p2pi/common/error.hpp"
#include "p2pi/common/json_util.hpp"
#include "p2pi/ingest/ingest.hpp"
#include "p2pi/preprocess/artifacts.hpp"
#include "p2pi/preprocess/preprocess.hpp"

using namespace p2pi;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "p2pi_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// One shared pipeline run: small synthetic dataset, artifacts with and
/// without derivative features, and a tiny trained checkpoint.
struct Pipeline {
  fs::path raw, art, art_d, run, model_config, train_config;
};

const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline p;
    const fs::path root = scratch_dir();
    p.raw = root / "raw";
    p.art = root / "art";
    p.art_d = root / "art_d";
    p.run = root / "run";
    p.model_config = root / "model.json";
    p.train_config = root / "train.json";
    save_json(p.model_config.string(),
              json{{"d_model", 16},
                   {"layers", 1},
                   {"heads", 2},
                   {"ff_dim", 32},
                   {"window", 20},
                   {"input_width", 82},
                   {"output_width", 63},
                   {"dropout", 0.1},
                   {"precision", "f64"},
                   {"seed", 3}});
    save_json(p.train_config.string(),
              json{{"epochs", 2}, {"batch", 8}, {"stride", 10}});

    REQUIRE(cli::run({"synth", "--out", p.raw.string(), "--seed", "11",
                      "--duration", "4", "--tasks", "walk,squat"}) == 0);
    REQUIRE(cli::run({"preprocess", "--raw", p.raw.string(), "--out",
                      p.art.string()}) == 0);
    REQUIRE(cli::run({"preprocess", "--raw", p.raw.string(), "--out",
                      p.art_d.string(), "--derivatives"}) == 0);
    REQUIRE(cli::run({"train", "--artifacts", p.art.string(), "--out",
                      p.run.string(), "--model-config", p.model_config.string(),
                      "--train-config", p.train_config.string(), "--seed", "5",
                      "--quiet"}) == 0);
    return p;
  }();
  return p;
}

}  // namespace

TEST_CASE("pipeline stages leave their expected outputs") {
  const Pipeline& p = pipeline();
  for (const char* f : {"manifest.json", "taxel_layout.csv", "walk_left.csv",
                        "walk_right.csv", "walk_mocap.csv", "walk_imu.csv",
                        "squat_left.csv", "run_manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(p.raw / f));
  }
  for (const char* f : {"header.json", "walk.features.f32", "walk.skeleton.f32",
                        "squat.features.f32", "squat.skeleton.f32"}) {
    CAPTURE(f);
    CHECK(fs::exists(p.art / f));
  }
  for (const char* f : {"checkpoint.bin", "history.csv", "history.json",
                        "run_manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(p.run / f));
  }

  SUBCASE("derivative artifacts triple the feature width") {
    const auto plain = preprocess::load_artifacts(p.art);
    const auto deriv = preprocess::load_artifacts(p.art_d);
    CHECK(plain.feature_width() == 82);
    CHECK(deriv.feature_width() == 246);
    CHECK(deriv.source_hashes == plain.source_hashes);
  }

  SUBCASE("run manifest records the command and config digest") {
    const json rm = load_json((p.run / "run_manifest.json").string());
    CHECK(rm.at("command") == "train");
    CHECK(rm.at("tool_version") == cli::kToolVersion);
    CHECK(rm.at("config_hash").get<std::string>().size() == 16);
    CHECK(rm.at("seeds") == json::array({5}));
  }
}

TEST_CASE("evaluation emits the full report set") {
  const Pipeline& p = pipeline();
  const fs::path rep = scratch_dir() / "rep";
  REQUIRE(cli::run({"eval", "--checkpoint", (p.run / "checkpoint.bin").string(),
                    "--artifacts", p.art.string(), "--out", rep.string()}) == 0);
  for (const char* f : {"task_report.csv", "part_report.csv", "report.json",
                        "report.svg", "run_manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(rep / f));
  }
  const std::string task_csv = read_bytes(rep / "task_report.csv");
  CHECK(task_csv.find("RMSE") != std::string::npos);
  CHECK(task_csv.find("Median_error") != std::string::npos);
  CHECK(task_csv.find("Std. Dev. Error") != std::string::npos);
  CHECK(task_csv.find("Walk") != std::string::npos);
  CHECK(task_csv.find("Squat") != std::string::npos);
  // Finite numbers in every data cell.
  const json rj = load_json((rep / "report.json").string());
  for (const auto& c : rj.at("tasks").at("columns")) {
    CHECK(std::isfinite(c.at("rmse").get<double>()));
    CHECK(std::isfinite(c.at("median").get<double>()));
    CHECK(std::isfinite(c.at("std").get<double>()));
  }
  CHECK(std::isfinite(rj.at("tasks").at("overall_rmse").get<double>()));
}

TEST_CASE("prediction writes a parseable skeleton csv") {
  const Pipeline& p = pipeline();
  const fs::path out = scratch_dir() / "pred" / "walk.csv";
  REQUIRE(cli::run({"predict", "--checkpoint", (p.run / "checkpoint.bin").string(),
                    "--left", (p.raw / "walk_left.csv").string(), "--right",
                    (p.raw / "walk_right.csv").string(), "--out", out.string()}) == 0);

  auto [skel, report] = ingest::read_mocap_csv(out);
  CHECK(skel.width() == core::kSkeletonWidth);
  CHECK(skel.frames() > 350);  // 4 s of input resampled to the 10 ms grid
  for (std::size_t i = 0; i < skel.frames(); ++i) {
    const double k = skel.time(i) / preprocess::kGridPeriod;
    CHECK(std::abs(k - std::round(k)) < 1e-9);
  }

  SUBCASE("predictions depend only on the checkpoint, not the artifacts") {
    const std::string first = read_bytes(out);
    const fs::path art_copy = scratch_dir() / "art_gone";
    fs::create_directories(art_copy);
    REQUIRE(cli::run({"predict", "--checkpoint", (p.run / "checkpoint.bin").string(),
                      "--left", (p.raw / "walk_left.csv").string(), "--right",
                      (p.raw / "walk_right.csv").string(), "--out",
                      out.string()}) == 0);
    CHECK(read_bytes(out) == first);
  }
}

TEST_CASE("training is deterministic across reruns") {
  const Pipeline& p = pipeline();
  const fs::path run2 = scratch_dir() / "run2";
  REQUIRE(cli::run({"train", "--artifacts", p.art.string(), "--out", run2.string(),
                    "--model-config", p.model_config.string(), "--train-config",
                    p.train_config.string(), "--seed", "5", "--quiet"}) == 0);
  CHECK(read_bytes(run2 / "history.csv") == read_bytes(p.run / "history.csv"));
  CHECK(read_bytes(run2 / "checkpoint.bin") == read_bytes(p.run / "checkpoint.bin"));

  SUBCASE("a different seed changes the outcome") {
    const fs::path run3 = scratch_dir() / "run3";
    REQUIRE(cli::run({"train", "--artifacts", p.art.string(), "--out", run3.string(),
                      "--model-config", p.model_config.string(), "--train-config",
                      p.train_config.string(), "--seed", "6", "--quiet"}) == 0);
    CHECK(read_bytes(run3 / "history.csv") != read_bytes(p.run / "history.csv"));
  }
}

TEST_CASE("exit codes distinguish failure classes") {
  const Pipeline& p = pipeline();
  const fs::path sink = scratch_dir() / "sink";

  SUBCASE("missing config file") {
    CHECK(cli::run({"synth", "--config", (scratch_dir() / "nope.json").string(),
                    "--out", sink.string()}) == cli::kConfig);
  }
  SUBCASE("unknown task id") {
    CHECK(cli::run({"synth", "--out", sink.string(), "--tasks", "moonwalk"}) ==
          cli::kConfig);
  }
  SUBCASE("unknown option") {
    CHECK(cli::run({"synth", "--frobnicate", "--out", sink.string()}) == cli::kConfig);
  }
  SUBCASE("no subcommand") { CHECK(cli::run({}) == cli::kConfig); }
  SUBCASE("help exits zero") { CHECK(cli::run({"--help"}) == cli::kOk); }
  SUBCASE("missing raw directory") {
    CHECK(cli::run({"preprocess", "--raw", (scratch_dir() / "no_raw").string(),
                    "--out", sink.string()}) == cli::kIo);
  }
  SUBCASE("missing artifacts directory") {
    CHECK(cli::run({"train", "--artifacts", (scratch_dir() / "no_art").string(),
                    "--out", sink.string()}) == cli::kIo);
  }
  SUBCASE("corrupt artifact header") {
    const fs::path bad = scratch_dir() / "bad_art";
    fs::create_directories(bad);
    fs::copy(p.art, bad, fs::copy_options::overwrite_existing | fs::copy_options::recursive);
    std::ofstream(bad / "header.json") << "{broken";
    CHECK(cli::run({"train", "--artifacts", bad.string(), "--out", sink.string()}) ==
          cli::kCompat);
  }
  SUBCASE("checkpoint and artifacts disagree on width") {
    CHECK(cli::run({"eval", "--checkpoint", (p.run / "checkpoint.bin").string(),
                    "--artifacts", p.art_d.string(), "--out", sink.string()}) ==
          cli::kCompat);
  }
  SUBCASE("ablation refuses different seeds") {
    cli::AblateOptions opts;
    opts.without_dir = p.art.string();
    opts.with_dir = p.art_d.string();
    opts.out_dir = sink.string();
    opts.seed_without = 1;
    opts.seed_with = 2;
    CHECK_THROWS_AS(cli::cmd_ablate(opts), GuardError);
  }
  SUBCASE("ablation refuses mismatched source data") {
    const fs::path raw2 = scratch_dir() / "raw2";
    const fs::path art2 = scratch_dir() / "art2";
    REQUIRE(cli::run({"synth", "--out", raw2.string(), "--seed", "99", "--duration",
                      "4", "--tasks", "walk"}) == 0);
    REQUIRE(cli::run({"preprocess", "--raw", raw2.string(), "--out", art2.string(),
                      "--derivatives"}) == 0);
    CHECK(cli::run({"ablate", "--without", p.art.string(), "--with", art2.string(),
                    "--out", sink.string()}) == cli::kGuard);
  }
}

TEST_CASE("output root env var rebases relative paths") {
  const fs::path root = scratch_dir() / "out_root";
  fs::create_directories(root);
  setenv("P2PI_OUT_ROOT", root.string().c_str(), 1);
  const int rc = cli::run(
      {"synth", "--out", "rooted", "--seed", "1", "--duration", "2", "--tasks", "walk"});
  unsetenv("P2PI_OUT_ROOT");
  REQUIRE(rc == 0);
  CHECK(fs::exists(root / "rooted" / "manifest.json"));
}
