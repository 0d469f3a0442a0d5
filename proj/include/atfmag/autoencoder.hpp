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

struct AeConfig {
  std::size_t latent_dim = 32;
  /// Hidden widths of the target networks; the encoder ends in latent_dim,
  /// the decoder in a single output.
  std::vector<std::size_t> encoder_hidden{64};
  std::vector<std::size_t> decoder_hidden{64};
  /// Shared trunk of each weight generator (FC + layer norm + Mish per layer),
  /// followed by one linear head per hyper-linear layer.
  std::size_t generator_width = 128;
  std::size_t generator_depth = 3;
  FourierFeatureConfig ffm{32, 1.0};

  std::size_t epochs = 1400;
  LearningRateSchedule schedule{{800, 1200}, {1e-3, 1e-4, 1e-5}};
  std::vector<std::size_t> training_counts{5, 10, 20, 100};
  /// Normaliser of the count entry; 0 means max(training_counts).
  double count_max = 0.0;
  std::size_t sources_per_step = 1;
  /// Decoder targets per source per step; 0 means every target.
  std::size_t targets_per_step = 0;
  bool standardize_input = true;

  std::size_t validation_count = 5;
  /// Fixed subset of targets scored during validation; 0 means all.
  std::size_t validation_targets = 0;

  /// Small model and schedule sized for the 128-source desk dataset.
  static AeConfig desk();
  double effective_count_max() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const AeConfig& c);
void from_json(const nlohmann::json& j, AeConfig& c);

struct InputStandardization {
  double mean = 0.0;
  double stddev = 1.0;
};

void to_json(nlohmann::json& j, const InputStandardization& s);
void from_json(const nlohmann::json& j, InputStandardization& s);

/// Mean and standard deviation of every training-split value.
InputStandardization training_statistics(const AtfDataset& dataset);

enum class AeNetwork { encoder, decoder };

/// Weight and bias of one hyper-linear layer, one row per condition:
/// packed[B, out * in + out] holds W[b] row-major followed by c[b].
struct GeneratedLayer {
  nn::Var packed;
  nn::Index in = 0;
  nn::Index out = 0;

  nn::Var weight() const;  // [B, out * in]
  nn::Var bias() const;    // [B, out]
};

class ConditionedAutoencoder {
 public:
  ConditionedAutoencoder() = default;
  ConditionedAutoencoder(const AeConfig& config, const InputScaling& scaling, const InputStandardization& standardization,
                         std::uint64_t seed);

  const AeConfig& config() const { return config_; }
  const InputScaling& scaling() const { return scaling_; }
  const InputStandardization& standardization() const { return standardization_; }
  nn::ModelParameters& params() { return params_; }
  const nn::ModelParameters& params() const { return params_; }

  /// Layer (in, out) sizes of the encoder or decoder target network.
  std::vector<std::pair<nn::Index, nn::Index>> layer_dims(AeNetwork which) const;

  /// Condition rows: encoder [P*F, 8] with the count entry, decoder [P*F, 7];
  /// position-major (row = p * F + f).
  nn::Tensor encoder_conditions(std::span<const Vec3> positions, const Vec3& source, std::span<const double> frequencies,
                                double count) const;
  nn::Tensor decoder_conditions(std::span<const Vec3> positions, const Vec3& source,
                                std::span<const double> frequencies) const;

  /// Shared generator trunk: conditions -> [R, generator_width].
  nn::Var generator_trunk(const std::vector<nn::Var>& leaves, AeNetwork which, const nn::Tensor& conditions) const;
  std::vector<GeneratedLayer> generate_weights(const std::vector<nn::Var>& leaves, AeNetwork which,
                                               const nn::Tensor& conditions) const;

  /// values [R,1] in dB -> latents [R,D].
  nn::Var encode(const std::vector<nn::Var>& leaves, const nn::Tensor& values, const nn::Tensor& conditions) const;
  /// prototypes [R,D] -> estimates [R,1] in dB.
  nn::Var decode(const std::vector<nn::Var>& leaves, const nn::Var& prototypes, const nn::Tensor& conditions) const;
  /// decode() at every (position, frequency) pair with prototypes [F,D]
  /// shared across positions. Returns [P*F, 1], position-major. Fourier
  /// features are built from separate position and frequency phases, and the
  /// first generator head is contracted with each prototype once. Agrees with
  /// decode() up to rounding. No gradients.
  nn::Tensor decode_shared(const nn::Tensor& prototypes, std::span<const Vec3> positions, const Vec3& source,
                           std::span<const double> frequencies) const;

  /// Training/validation graph for one source: encode all observations,
  /// average per frequency, decode at `targets`. Returns [T,F].
  nn::Var forward(const std::vector<nn::Var>& leaves, const Observations& observations, const Vec3& source,
                  std::span<const Vec3> targets, std::span<const double> frequencies) const;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static ConditionedAutoencoder load(const std::filesystem::path& path);

 private:
  nn::Var target_network(const std::vector<nn::Var>& leaves, AeNetwork which, nn::Var input,
                         const std::vector<GeneratedLayer>& layers) const;
  nn::Var generator_mlp(const std::vector<nn::Var>& leaves, AeNetwork which, nn::Var features) const;

  AeConfig config_;
  InputScaling scaling_;
  InputStandardization standardization_;
  nn::ModelParameters params_;
};

/// Arithmetic mean of the rows of latents [M,D], correctly rounded per
/// column so the result does not depend on row order. Throws
/// std::invalid_argument("no observations") when M = 0.
nn::Tensor aggregate(const nn::Tensor& latents);

struct AePredictOptions {
  /// Overrides the count fed to the encoder condition (0: use M).
  double count_override = 0.0;
  std::size_t workers = 1;
  std::size_t chunk_rows = 8192;
};

/// Prototypes [F,D]: every observation is encoded on its own, then the
/// latents are averaged per frequency.
nn::Tensor ae_prototypes(const ConditionedAutoencoder& model, const Observations& observations, const Vec3& source,
                         std::span<const double> frequencies, const AePredictOptions& options = {});

/// Decodes prototypes [F,D] at every target: estimates[n * F + f].
std::vector<double> ae_decode(const ConditionedAutoencoder& model, const nn::Tensor& prototypes, const Vec3& source,
                              std::span<const Vec3> targets, std::span<const double> frequencies,
                              const AePredictOptions& options = {});

/// Optimisation-free inference: prototypes then decoding.
std::vector<double> ae_predict(const ConditionedAutoencoder& model, const Observations& observations, const Vec3& source,
                               std::span<const Vec3> targets, std::span<const double> frequencies,
                               const AePredictOptions& options = {});

struct AeTrainResult {
  ConditionedAutoencoder model;  // parameters of the best validation epoch
  TrainingHistory history;
};

/// Minimises mean LSD with per-step sampled sources, counts and measurement
/// positions. Throws std::runtime_error naming the step on a non-finite loss.
AeTrainResult ae_train(const AtfDataset& dataset, const AeConfig& config, std::uint64_t seed,
                       const EpochCallback& on_epoch = {});

/// Mean validation LSD with the fixed, seeded validation measurement sets.
double ae_validation_loss(const ConditionedAutoencoder& model, const AtfDataset& dataset, std::uint64_t seed);

}  // namespace atfmag
