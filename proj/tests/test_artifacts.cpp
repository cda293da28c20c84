#include "p2pi/preprocess/artifacts.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "p2pi/common/error.hpp"
#include "p2pi/common/json_util.hpp"
#include "p2pi/numerics/rng.hpp"

using namespace p2pi;
using preprocess::ArtifactRecording;
using preprocess::DatasetArtifacts;

namespace fs = std::filesystem;

namespace {

core::Series random_series(int width, int frames, std::int64_t first_index,
                           std::uint64_t seed) {
  numerics::RngStream rng(seed, 0);
  core::Series s(width);
  std::vector<double> row(width);
  for (int f = 0; f < frames; ++f) {
    // Values that survive the f32 round trip exactly.
    for (double& v : row) v = static_cast<float>(rng.uniform(-100.0, 100.0));
    s.push_back((first_index + f) * preprocess::kGridPeriod, row);
  }
  return s;
}

preprocess::ChannelStats stats_of_width(int width) {
  preprocess::ChannelStats stats;
  for (int c = 0; c < width; ++c) {
    preprocess::ChannelStatsEntry e;
    e.min = -1.0 - c;
    e.max = 1.0 + c;
    e.mean = 0.5 * c;
    e.stddev = 1.0 + 0.1 * c;
    stats.channels.push_back(e);
  }
  return stats;
}

DatasetArtifacts sample_artifacts(bool with_derivatives = false) {
  DatasetArtifacts data;
  data.with_derivatives = with_derivatives;
  const int sensor_width = 4;
  data.stats = stats_of_width(sensor_width);
  data.config_hash = "deadbeef";
  data.source_hashes = {{"a.csv", "0011"}, {"b.csv", "2233"}};
  const int fw = data.feature_width();
  ArtifactRecording rec;
  rec.name = "walk";
  rec.task = core::TaskLabel::Walk;
  rec.first_index = 3;
  rec.features = random_series(fw, 12, 3, 7);
  rec.skeleton = random_series(core::kSkeletonWidth, 12, 3, 8);
  data.recordings.push_back(rec);
  ArtifactRecording rec2;
  rec2.name = "squat";
  rec2.task = core::TaskLabel::Squat;
  rec2.first_index = 0;
  rec2.features = random_series(fw, 9, 0, 9);
  rec2.skeleton = random_series(core::kSkeletonWidth, 9, 0, 10);
  data.recordings.push_back(rec2);
  return data;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / "p2pi_artifact_tests" / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("artifact round trip preserves everything") {
  TempDir tmp("roundtrip");
  DatasetArtifacts data = sample_artifacts();
  preprocess::save_artifacts(data, tmp.path / "art");

  const DatasetArtifacts back = preprocess::load_artifacts(tmp.path / "art");
  CHECK(back.with_derivatives == data.with_derivatives);
  CHECK(back.split_ratio == data.split_ratio);
  CHECK(back.grid_period == data.grid_period);
  CHECK(back.config_hash == data.config_hash);
  CHECK(back.source_hashes == data.source_hashes);
  REQUIRE(back.recordings.size() == 2);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto& a = data.recordings[r];
    const auto& b = back.recordings[r];
    CHECK(b.name == a.name);
    CHECK(b.task == a.task);
    CHECK(b.first_index == a.first_index);
    REQUIRE(b.features.frames() == a.features.frames());
    REQUIRE(b.features.width() == a.features.width());
    for (std::size_t f = 0; f < a.features.frames(); ++f) {
      CHECK(b.features.time(f) == a.features.time(f));  // implicit grid timestamps
      for (int c = 0; c < a.features.width(); ++c) {
        CHECK(b.features.at(f, c) == a.features.at(f, c));
      }
      for (int c = 0; c < core::kSkeletonWidth; ++c) {
        CHECK(b.skeleton.at(f, c) == a.skeleton.at(f, c));
      }
    }
  }

  SUBCASE("stats survive") {
    REQUIRE(back.stats.width() == 4);
    for (int c = 0; c < 4; ++c) {
      CHECK(back.stats.channels[c].mean == data.stats.channels[c].mean);
      CHECK(back.stats.channels[c].stddev == data.stats.channels[c].stddev);
    }
  }
}

TEST_CASE("storage quantizes to 32-bit floats") {
  TempDir tmp("quant");
  DatasetArtifacts data = sample_artifacts();
  const double precise = 0.1234567890123456789;  // not representable in f32
  data.recordings[0].features.at(0, 0) = precise;
  preprocess::save_artifacts(data, tmp.path / "art");
  const DatasetArtifacts back = preprocess::load_artifacts(tmp.path / "art");
  CHECK(back.recordings[0].features.at(0, 0) ==
        static_cast<double>(static_cast<float>(precise)));
  CHECK(back.recordings[0].features.at(0, 0) != precise);
}

TEST_CASE("derivative flag triples the feature width") {
  DatasetArtifacts plain = sample_artifacts(false);
  DatasetArtifacts deriv = sample_artifacts(true);
  CHECK(plain.feature_width() == 4);
  CHECK(deriv.feature_width() == 12);
  CHECK(plain.target_width() == core::kSkeletonWidth);
}

TEST_CASE("saving twice yields byte-identical files") {
  TempDir tmp("bytes");
  DatasetArtifacts data = sample_artifacts();
  preprocess::save_artifacts(data, tmp.path / "a");
  preprocess::save_artifacts(data, tmp.path / "b");
  for (const char* name :
       {"header.json", "walk.features.f32", "walk.skeleton.f32", "squat.features.f32",
        "squat.skeleton.f32"}) {
    CAPTURE(name);
    CHECK(read_bytes(tmp.path / "a" / name) == read_bytes(tmp.path / "b" / name));
  }
}

TEST_CASE("artifact validation rejects inconsistent data") {
  TempDir tmp("validate");

  SUBCASE("recordings with unequal feature and skeleton frames") {
    DatasetArtifacts data = sample_artifacts();
    data.recordings[0].skeleton = random_series(core::kSkeletonWidth, 5, 3, 8);
    CHECK_THROWS_AS(preprocess::save_artifacts(data, tmp.path / "bad"), AlignmentError);
  }
  SUBCASE("feature width off the declared stats") {
    DatasetArtifacts data = sample_artifacts();
    data.recordings[1].features = random_series(7, 9, 0, 9);
    CHECK_THROWS_AS(preprocess::save_artifacts(data, tmp.path / "bad"), Error);
  }
  SUBCASE("duplicate recording names") {
    DatasetArtifacts data = sample_artifacts();
    data.recordings[1].name = "walk";
    CHECK_THROWS_AS(preprocess::save_artifacts(data, tmp.path / "bad"), Error);
  }
  SUBCASE("no recordings at all") {
    DatasetArtifacts data = sample_artifacts();
    data.recordings.clear();
    CHECK_THROWS_AS(preprocess::save_artifacts(data, tmp.path / "bad"), Error);
  }
  SUBCASE("non-finite values") {
    DatasetArtifacts data = sample_artifacts();
    data.recordings[0].features.at(2, 1) = std::nan("");
    CHECK_THROWS_AS(preprocess::save_artifacts(data, tmp.path / "bad"), DataError);
  }
}

TEST_CASE("loading surfaces corruption as format errors") {
  TempDir tmp("corrupt");
  DatasetArtifacts data = sample_artifacts();
  preprocess::save_artifacts(data, tmp.path / "art");

  SUBCASE("missing directory is an io error") {
    CHECK_THROWS_AS(preprocess::load_artifacts(tmp.path / "nope"), IoError);
  }
  SUBCASE("corrupt header json") {
    std::ofstream(tmp.path / "art" / "header.json") << "{not json";
    CHECK_THROWS_AS(preprocess::load_artifacts(tmp.path / "art"), FormatError);
  }
  SUBCASE("header with wrong version") {
    json h = load_json((tmp.path / "art" / "header.json").string());
    h["format_version"] = 99;
    save_json((tmp.path / "art" / "header.json").string(), h);
    CHECK_THROWS_AS(preprocess::load_artifacts(tmp.path / "art"), FormatError);
  }
  SUBCASE("truncated tensor file") {
    const fs::path f = tmp.path / "art" / "walk.features.f32";
    std::string bytes = read_bytes(f);
    bytes.resize(bytes.size() - 3);
    std::ofstream(f, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_THROWS_AS(preprocess::load_artifacts(tmp.path / "art"), FormatError);
  }
  SUBCASE("missing tensor file") {
    fs::remove(tmp.path / "art" / "squat.skeleton.f32");
    CHECK_THROWS_AS(preprocess::load_artifacts(tmp.path / "art"), IoError);
  }
}
