#include "p2pi/preprocess/artifacts.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "p2pi/common/error.hpp"
#include "p2pi/common/json_util.hpp"

namespace p2pi::preprocess {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kFormatVersion = 1;

std::string features_file(const std::string& name) { return name + ".features.f32"; }
std::string skeleton_file(const std::string& name) { return name + ".skeleton.f32"; }

void write_f32(const fs::path& path, const core::Series& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::vector<float> row(s.width());
  for (std::size_t i = 0; i < s.frames(); ++i) {
    const auto src = s.row(i);
    for (int c = 0; c < s.width(); ++c) row[c] = static_cast<float>(src[c]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  out.flush();
  if (!out) throw IoError("short write to " + path.string());
}

core::Series read_f32(const fs::path& path, int width, std::size_t frames,
                      std::int64_t first_index, double period) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t expected = frames * static_cast<std::uint64_t>(width) * sizeof(float);
  if (size != expected) {
    throw FormatError(path.string() + ": expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(size));
  }
  in.seekg(0);
  core::Series s(width);
  std::vector<float> buf(width);
  std::vector<double> row(width);
  for (std::size_t i = 0; i < frames; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw IoError("short read from " + path.string());
    for (int c = 0; c < width; ++c) {
      if (!std::isfinite(buf[c])) {
        throw FormatError(path.string() + ": non-finite value at frame " + std::to_string(i));
      }
      row[c] = buf[c];
    }
    s.push_back((static_cast<double>(first_index) + static_cast<double>(i)) * period, row);
  }
  return s;
}

}  // namespace

int DatasetArtifacts::feature_width() const {
  return stats.width() * (with_derivatives ? 3 : 1);
}

int DatasetArtifacts::target_width() const { return core::kSkeletonWidth; }

void DatasetArtifacts::validate() const {
  if (!(grid_period > 0)) throw DataError("artifact grid period must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw DataError("artifact split ratio must be in (0, 1)");
  }
  if (stats.width() == 0) throw DataError("artifacts carry no channel statistics");
  if (recordings.empty()) throw DataError("artifacts carry no recordings");
  std::set<std::string> names;
  for (const ArtifactRecording& rec : recordings) {
    if (rec.name.empty()) throw DataError("artifact recording without a name");
    if (!names.insert(rec.name).second) {
      throw DataError("duplicate artifact recording name " + rec.name);
    }
    if (rec.features.width() != feature_width()) {
      throw ShapeError("recording " + rec.name + " feature width " +
                       std::to_string(rec.features.width()) + " does not match header width " +
                       std::to_string(feature_width()));
    }
    if (rec.skeleton.width() != target_width()) {
      throw ShapeError("recording " + rec.name + " skeleton width " +
                       std::to_string(rec.skeleton.width()));
    }
    if (rec.features.frames() != rec.skeleton.frames()) {
      throw AlignmentError("recording " + rec.name + " has " +
                           std::to_string(rec.features.frames()) + " feature frames but " +
                           std::to_string(rec.skeleton.frames()) + " skeleton frames");
    }
    if (rec.features.empty()) throw DataError("recording " + rec.name + " is empty");
    for (std::size_t i = 0; i < rec.features.frames(); ++i) {
      const double want = (static_cast<double>(rec.first_index) + static_cast<double>(i)) *
                          grid_period;
      if (std::abs(rec.features.time(i) - want) > kGridTolerance ||
          std::abs(rec.skeleton.time(i) - want) > kGridTolerance) {
        throw AlignmentError("recording " + rec.name + " is off the storage grid at frame " +
                             std::to_string(i));
      }
    }
  }
}

void save_artifacts(const DatasetArtifacts& data, const fs::path& dir) {
  data.validate();
  for (const ArtifactRecording& rec : data.recordings) {
    for (const core::Series* s : {&rec.features, &rec.skeleton}) {
      for (double v : s->values()) {
        if (!std::isfinite(v)) {
          throw DataError("recording " + rec.name + " contains non-finite values");
        }
      }
    }
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json recs = json::array();
  for (const ArtifactRecording& rec : data.recordings) {
    write_f32(dir / features_file(rec.name), rec.features);
    write_f32(dir / skeleton_file(rec.name), rec.skeleton);
    recs.push_back(json{{"name", rec.name},
                        {"task", std::string(core::task_id(rec.task))},
                        {"first_index", rec.first_index},
                        {"frames", rec.features.frames()},
                        {"features_file", features_file(rec.name)},
                        {"skeleton_file", skeleton_file(rec.name)}});
  }
  json sources = json::object();
  for (const auto& [file, digest] : data.source_hashes) sources[file] = digest;
  const json header{{"format_version", kFormatVersion},
                    {"grid_period", data.grid_period},
                    {"with_derivatives", data.with_derivatives},
                    {"split_ratio", data.split_ratio},
                    {"feature_width", data.feature_width()},
                    {"target_width", data.target_width()},
                    {"stats", data.stats.to_json()},
                    {"config_hash", data.config_hash},
                    {"source_hashes", sources},
                    {"recordings", recs}};
  save_json((dir / "header.json").string(), header);
}

DatasetArtifacts load_artifacts(const fs::path& dir) {
  const fs::path header_path = dir / "header.json";
  json header;
  try {
    header = load_json(header_path.string());
  } catch (const ConfigError& e) {
    // A header that does not parse is corrupt data, not a bad config.
    throw FormatError(e.what());
  }
  const auto version = json_get(header, "format_version", std::uint32_t{0});
  if (version != kFormatVersion) {
    throw FormatError(header_path.string() + ": unsupported format version " +
                      std::to_string(version));
  }

  DatasetArtifacts data;
  data.grid_period = json_get(header, "grid_period", kGridPeriod);
  data.with_derivatives = json_get(header, "with_derivatives", false);
  data.split_ratio = json_get(header, "split_ratio", 0.8);
  data.config_hash = json_get(header, "config_hash", std::string());
  if (!header.contains("stats")) throw FormatError(header_path.string() + ": missing stats");
  data.stats = ChannelStats::from_json(header.at("stats"));
  if (header.contains("source_hashes")) {
    for (const auto& [file, digest] : header.at("source_hashes").items()) {
      data.source_hashes.emplace_back(file, digest.get<std::string>());
    }
  }
  if (!header.contains("recordings")) {
    throw FormatError(header_path.string() + ": missing recordings");
  }

  const int fwidth = json_get(header, "feature_width", 0);
  const int twidth = json_get(header, "target_width", core::kSkeletonWidth);
  try {
    for (const auto& r : header.at("recordings")) {
      ArtifactRecording rec;
      rec.name = r.at("name").get<std::string>();
      rec.task = core::task_from_id(r.at("task").get<std::string>());
      rec.first_index = r.at("first_index").get<std::int64_t>();
      const auto frames = r.at("frames").get<std::size_t>();
      rec.features = read_f32(dir / r.at("features_file").get<std::string>(), fwidth, frames,
                              rec.first_index, data.grid_period);
      rec.skeleton = read_f32(dir / r.at("skeleton_file").get<std::string>(), twidth, frames,
                              rec.first_index, data.grid_period);
      rec.features.meta.task = rec.task;
      rec.skeleton.meta.task = rec.task;
      rec.features.meta.source_rate_hz = 1.0 / data.grid_period;
      rec.skeleton.meta.source_rate_hz = 1.0 / data.grid_period;
      data.recordings.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw FormatError(header_path.string() + ": malformed recording entry: " + e.what());
  }
  data.validate();
  return data;
}

}  // namespace p2pi::preprocess
