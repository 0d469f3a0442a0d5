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
#include <span>
#include <vector>

#include <json.hpp>

#include "atfmag/conditioning.hpp"
#include "atfmag/dataset.hpp"
#include "atfmag/nn/autodiff.hpp"
#include "atfmag/nn/parameters.hpp"
#include "atfmag/training.hpp"

namespace atfmag {

/// Coordinate-network baseline: (receiver, source, frequency) -> dB.
struct NfConfig {
  std::size_t hidden_layers = 3;
  std::size_t hidden_width = 128;
  FourierFeatureConfig ffm{32, 1.0};
  std::size_t epochs = 1400;
  std::size_t batch_pairs = 256;
  /// (target, source) pairs drawn per epoch; 0 means every training pair.
  std::size_t pairs_per_epoch = 0;
  LearningRateSchedule schedule = LearningRateSchedule::constant(1e-3);
  std::size_t finetune_epochs = 10;
  double finetune_learning_rate = 1e-5;

  /// 300 epochs of 2048 sampled pairs with the scaled step schedule.
  static NfConfig desk();
  void validate() const;
};

void to_json(nlohmann::json& j, const NfConfig& c);
void from_json(const nlohmann::json& j, NfConfig& c);

class NeuralField {
 public:
  NeuralField() = default;
  NeuralField(const NfConfig& config, const InputScaling& scaling, std::uint64_t seed);

  const NfConfig& config() const { return config_; }
  const InputScaling& scaling() const { return scaling_; }
  nn::ModelParameters& params() { return params_; }
  const nn::ModelParameters& params() const { return params_; }

  /// Forward pass over normalised-input rows [B,7] -> [B,1] (dB).
  nn::Var forward(const std::vector<nn::Var>& leaves, const nn::Tensor& conditions) const;

  /// Single-point evaluation.
  double predict(const Vec3& receiver, const Vec3& source, double frequency) const;
  /// Estimates[n * F + f] for every target and frequency.
  std::vector<double> predict(std::span<const Vec3> targets, const Vec3& source,
                              std::span<const double> frequencies) const;

  /// Condition rows for every (position, frequency) of one source, position-major.
  nn::Tensor conditions(std::span<const Vec3> receivers, const Vec3& source,
                        std::span<const double> frequencies) const;

  /// Sets the output layer to zero (output is then 0 dB everywhere).
  void zero_output_layer();

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static NeuralField load(const std::filesystem::path& path);

 private:
  NfConfig config_;
  InputScaling scaling_;
  nn::ModelParameters params_;
};

struct NfTrainResult {
  NeuralField model;
  TrainingHistory history;
};

/// Minimises mean LSD over all (target, source) pairs of the training split.
/// Throws std::runtime_error naming the epoch if the loss becomes non-finite.
NfTrainResult nf_train(const AtfDataset& dataset, const NfConfig& config, std::uint64_t seed,
                       const EpochCallback& on_epoch = {});

struct AdaptationTrace {
  std::vector<double> losses;  // observation LSD before each fine-tuning epoch, then after the last
};

/// Fine-tunes a copy of `base` on the observations of one source (Adam,
/// config().finetune_epochs epochs at config().finetune_learning_rate, fresh
/// optimiser state) and evaluates the copy at every target and frequency.
/// `base` is never modified.
std::vector<double> nf_adapt_and_predict(const NeuralField& base, const Observations& observations,
                                         const Vec3& source, std::span<const Vec3> targets,
                                         std::span<const double> frequencies, AdaptationTrace* trace = nullptr,
                                         std::size_t epochs_override = static_cast<std::size_t>(-1));

}  // namespace atfmag
