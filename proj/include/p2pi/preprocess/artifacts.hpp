#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "p2pi/core/series.hpp"
#include "p2pi/preprocess/preprocess.hpp"

namespace p2pi::preprocess {

/// One preprocessed recording on the 0.01 s grid. Timestamps are implicit:
/// frame i sits at (first_index + i) * grid_period, which keeps reruns
/// bit-identical without storing a float per frame.
struct ArtifactRecording {
  std::string name;  // file stem, unique within the set
  core::TaskLabel task = core::TaskLabel::Unknown;
  std::int64_t first_index = 0;
  core::Series features;          // normalized sensor features
  core::SkeletonSeries skeleton;  // 63-wide targets, millimeters
};

/// A preprocessed dataset directory: header.json plus two flat little-endian
/// float32 arrays (row-major, frames x width) per recording.
struct DatasetArtifacts {
  double grid_period = kGridPeriod;
  bool with_derivatives = false;
  double split_ratio = 0.8;  // stats were fitted on this leading fraction
  ChannelStats stats;        // sensor-channel scaling, pre-derivative width
  std::string config_hash;
  std::vector<std::pair<std::string, std::string>> source_hashes;  // raw file -> digest
  std::vector<ArtifactRecording> recordings;

  int feature_width() const;
  int target_width() const;
  void validate() const;
};

void save_artifacts(const DatasetArtifacts& data, const std::filesystem::path& dir);
DatasetArtifacts load_artifacts(const std::filesystem::path& dir);

}  // namespace p2pi::preprocess
