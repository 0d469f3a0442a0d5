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
#include <span>
#include <vector>

#include <json.hpp>

#include "atfmag/acoustics.hpp"
#include "atfmag/dataset.hpp"
#include "atfmag/nn/tensor.hpp"

namespace atfmag {

/// Fourier feature mapping settings: `features` random frequencies drawn
/// i.i.d. N(0, scale^2) per input dimension; the mapping emits 2 * features values.
struct FourierFeatureConfig {
  std::size_t features = 32;
  double scale = 1.0;
};

void to_json(nlohmann::json& j, const FourierFeatureConfig& c);
void from_json(const nlohmann::json& j, FourierFeatureConfig& c);

/// Maxima used to normalise conditioning inputs (each value is divided by
/// its recorded maximum).
struct InputScaling {
  Vec3 receiver_max{1.0, 1.0, 1.0};
  Vec3 source_max{1.0, 1.0, 1.0};
  double frequency_max = 1.0;
  double count_max = 1.0;

  /// Receivers: per-axis maximum over the target grid. Sources: the room
  /// dimensions. Frequency: highest bin. Count: `count_max`.
  static InputScaling from_dataset(const AtfDataset& dataset, double count_max = 1.0);

  /// Writes [x/xmax, y/ymax, f/fmax] (and M/Mmax when `count` is given) into `row`.
  void fill(std::span<double> row, const Vec3& receiver, const Vec3& source, double frequency) const;
  void fill(std::span<double> row, const Vec3& receiver, const Vec3& source, double frequency, double count) const;
};

void to_json(nlohmann::json& j, const InputScaling& s);
void from_json(const nlohmann::json& j, InputScaling& s);

inline constexpr nn::Index kDecoderConditionWidth = 7;
inline constexpr nn::Index kEncoderConditionWidth = 8;

/// Measured log-magnitudes for one source: values[m * F + f] in dB.
struct Observations {
  std::vector<Vec3> positions;
  std::vector<double> values;

  std::size_t count() const { return positions.size(); }
};

/// Observations of source `l` at the given target indices of a dataset.
Observations observe(const AtfDataset& dataset, std::size_t source, std::span<const std::size_t> target_indices);

}  // namespace atfmag
