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

#include "atfmag/training.hpp"

#include <cmath>
#include <stdexcept>

#include "atfmag/json_io.hpp"

namespace atfmag {

double LearningRateSchedule::at(std::size_t epoch) const {
  std::size_t k = 0;
  while (k < milestones.size() && epoch > milestones[k]) ++k;
  return rates.at(k);
}

void LearningRateSchedule::validate() const {
  if (rates.size() != milestones.size() + 1)
    throw std::invalid_argument("learning-rate schedule needs one more rate than milestones");
  for (std::size_t k = 1; k < milestones.size(); ++k)
    if (milestones[k] <= milestones[k - 1]) throw std::invalid_argument("schedule milestones must increase");
  for (double r : rates)
    if (!(r > 0.0)) throw std::invalid_argument("learning rates must be positive");
}

void to_json(nlohmann::json& j, const LearningRateSchedule& s) {
  j = nlohmann::json{{"milestones", s.milestones}, {"rates", s.rates}};
}

void from_json(const nlohmann::json& j, LearningRateSchedule& s) {
  read_optional(j, "milestones", s.milestones);
  read_optional(j, "rates", s.rates);
}

void to_json(nlohmann::json& j, const TrainingHistory& h) {
  j = nlohmann::json::object();
  j["best_epoch"] = h.best_epoch;
  j["best_validation_loss"] = std::isfinite(h.best_validation_loss) ? nlohmann::json(h.best_validation_loss) : nlohmann::json();
  auto& rows = j["epochs"] = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"learning_rate", e.learning_rate},
                    {"train_loss", e.train_loss},
                    {"validation_loss", std::isfinite(e.validation_loss) ? nlohmann::json(e.validation_loss)
                                                                         : nlohmann::json()}});
  }
}

}  // namespace atfmag
