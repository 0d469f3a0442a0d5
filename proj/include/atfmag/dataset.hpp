// Copyright 2026 The atfmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atfmag/acoustics.hpp"

namespace atfmag {

inline constexpr int kDatasetFormatVersion = 1;

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

std::string to_string(Split split);

/// Split assignment over source indices.
struct SplitAssignment {
  std::vector<Split> of_source;
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const;
};

/// Disjoint seeded partition of `num_sources` indices into train/val/test.
SplitAssignment split_dataset(std::size_t num_sources, std::size_t train, std::size_t validation,
                              std::size_t test, std::uint64_t seed);

/// Everything needed to regenerate a dataset.
struct DatasetConfig {
  RoomSpec room;  // reflection_amplitude is derived from rt60
  double rt60 = 0.2;
  Box target_region{{2.0, 3.0, 1.5}, {1.0, 1.0, 1.0}};
  std::size_t grid_points_per_axis = 11;
  std::size_t num_sources = 1024;
  double source_wall_margin = 0.0;    // metres kept clear of each wall
  double source_region_margin = 0.0;  // metres kept clear of the target region
  int max_order = -1;                 // negative: default_max_order
  std::size_t train = 820, validation = 102, test = 102;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: hardware concurrency

  static DatasetConfig full_scale();
  /// 128 sources split 96/16/16.
  static DatasetConfig desk_scale();
};

/// Log-ATF magnitude tensor a[n, l, f] (dB) with its coordinate tables.
/// Values are held as 32-bit floats, matching the on-disk format.
struct AtfDataset {
  DatasetConfig config;
  PositionSet targets;
  PositionSet sources;
  std::vector<double> frequencies;  // Hz, bin centres
  std::vector<float> values;        // (n, l, f) row-major
  SplitAssignment split;

  std::size_t num_targets() const { return targets.size(); }
  std::size_t num_sources() const { return sources.size(); }
  std::size_t num_bins() const { return frequencies.size(); }

  std::size_t offset(std::size_t n, std::size_t l) const {
    return (n * num_sources() + l) * num_bins();
  }
  float at(std::size_t n, std::size_t l, std::size_t f) const { return values[offset(n, l) + f]; }
  std::span<const float> spectrum(std::size_t n, std::size_t l) const {
    return {values.data() + offset(n, l), num_bins()};
  }

  /// Content hash over coordinates, values and split.
  std::uint64_t fingerprint() const;
};

/// Draws `count` source positions uniformly inside the room, outside the
/// (margin-expanded) target region.
PositionSet sample_source_positions(const DatasetConfig& config, std::uint64_t seed);

/// Image-source simulation of every (target, source) pair. Parallel over
/// sources; the output does not depend on the worker count.
AtfDataset generate_dataset(const DatasetConfig& config);

/// Same, with caller-provided position sets.
AtfDataset generate_dataset(const DatasetConfig& config, const PositionSet& targets,
                            const PositionSet& sources);

void save_dataset(const AtfDataset& dataset, const std::filesystem::path& dir);
AtfDataset load_dataset(const std::filesystem::path& dir);

}  // namespace atfmag
