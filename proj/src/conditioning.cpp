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

#include "atfmag/conditioning.hpp"

#include <algorithm>
#include <stdexcept>

#include "atfmag/json_io.hpp"

namespace atfmag {

void to_json(nlohmann::json& j, const FourierFeatureConfig& c) {
  j = nlohmann::json{{"features", c.features}, {"scale", c.scale}};
}

void from_json(const nlohmann::json& j, FourierFeatureConfig& c) {
  read_optional(j, "features", c.features);
  read_optional(j, "scale", c.scale);
}

void to_json(nlohmann::json& j, const InputScaling& s) {
  j = nlohmann::json{{"receiver_max", s.receiver_max},
                     {"source_max", s.source_max},
                     {"frequency_max", s.frequency_max},
                     {"count_max", s.count_max}};
}

void from_json(const nlohmann::json& j, InputScaling& s) {
  s.receiver_max = j.at("receiver_max").get<Vec3>();
  s.source_max = j.at("source_max").get<Vec3>();
  s.frequency_max = j.at("frequency_max").get<double>();
  s.count_max = j.at("count_max").get<double>();
}

InputScaling InputScaling::from_dataset(const AtfDataset& dataset, double count_max) {
  InputScaling s;
  s.receiver_max = {0.0, 0.0, 0.0};
  for (const auto& p : dataset.targets.coords)
    for (int i = 0; i < 3; ++i) s.receiver_max[i] = std::max(s.receiver_max[i], std::abs(p[i]));
  s.source_max = dataset.config.room.dimensions;
  s.frequency_max = *std::max_element(dataset.frequencies.begin(), dataset.frequencies.end());
  s.count_max = count_max;
  for (int i = 0; i < 3; ++i)
    if (!(s.receiver_max[i] > 0.0)) throw std::invalid_argument("receiver coordinates must not all be zero");
  return s;
}

void InputScaling::fill(std::span<double> row, const Vec3& receiver, const Vec3& source, double frequency) const {
  for (int i = 0; i < 3; ++i) {
    row[i] = receiver[i] / receiver_max[i];
    row[3 + i] = source[i] / source_max[i];
  }
  row[6] = frequency / frequency_max;
}

void InputScaling::fill(std::span<double> row, const Vec3& receiver, const Vec3& source, double frequency,
                        double count) const {
  fill(row, receiver, source, frequency);
  row[7] = count / count_max;
}

Observations observe(const AtfDataset& dataset, std::size_t source, std::span<const std::size_t> target_indices) {
  Observations obs;
  const std::size_t F = dataset.num_bins();
  obs.values.reserve(target_indices.size() * F);
  for (std::size_t n : target_indices) {
    if (n >= dataset.num_targets()) throw std::out_of_range("measurement index out of range");
    obs.positions.push_back(dataset.targets.coords[n]);
    auto spec = dataset.spectrum(n, source);
    obs.values.insert(obs.values.end(), spec.begin(), spec.end());
  }
  return obs;
}

}  // namespace atfmag
