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
#include <functional>
#include <limits>
#include <vector>

#include <json.hpp>

#include "atfmag/nn/parameters.hpp"

namespace atfmag {

/// Piecewise-constant learning rate over 1-based epochs: rates[k] applies
/// after milestones[k-1] and up to and including milestones[k].
struct LearningRateSchedule {
  std::vector<std::size_t> milestones;
  std::vector<double> rates{1e-3};

  static LearningRateSchedule constant(double rate) { return {{}, {rate}}; }
  double at(std::size_t epoch) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const LearningRateSchedule& s);
void from_json(const nlohmann::json& j, LearningRateSchedule& s);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
};

void to_json(nlohmann::json& j, const TrainingHistory& h);

/// Called after every epoch with the current parameters.
using EpochCallback = std::function<void(const EpochRecord&, const nn::ModelParameters&)>;

}  // namespace atfmag
