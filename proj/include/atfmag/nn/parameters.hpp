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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atfmag/nn/autodiff.hpp"
#include "atfmag/nn/tensor.hpp"
#include "atfmag/rng.hpp"

namespace atfmag::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Named parameter tensors plus Adam state. Entries marked non-trainable
/// (e.g. Fourier feature matrices) are stored but never updated.
class ModelParameters {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
    Tensor first_moment;
    Tensor second_moment;
  };

  std::size_t add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Tensor& value(std::size_t i) { return entries_.at(i).value; }
  const Tensor& value(std::size_t i) const { return entries_.at(i).value; }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // throws if absent

  std::uint64_t step() const { return step_; }
  std::size_t parameter_count() const;

  /// Graph leaves for one forward pass, in entry order. With `track`,
  /// trainable entries collect gradients; otherwise all are constants.
  std::vector<Var> bind(bool track) const;

  /// Gradients of the bound leaves (zeros where nothing flowed).
  std::vector<Tensor> gradients(const std::vector<Var>& leaves) const;

  /// Bias-corrected Adam update of every trainable entry; throws
  /// std::runtime_error("diverged") on a non-finite gradient.
  void adam_step(std::span<const Tensor> gradients, double learning_rate, const AdamOptions& options = {});

  /// Zeroes both moment estimates and the step counter.
  void reset_optimizer();

  /// Hash of names and values (not optimiser state).
  std::uint64_t hash() const;
  /// Hash including optimiser state and step counter.
  std::uint64_t full_hash() const;

  void save(std::ostream& out) const;
  static ModelParameters load(std::istream& in);

 private:
  std::vector<Entry> entries_;
  std::uint64_t step_ = 0;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Versioned binary checkpoint: magic, version, metadata (UTF-8 JSON text),
/// parameter manifest (names, shapes, trainable flags), float64-le values,
/// then the optimiser state.
void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params, const std::string& metadata);

struct Checkpoint {
  ModelParameters params;
  std::string metadata;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

Tensor uniform_tensor(Shape shape, double bound, Rng& rng);
Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

}  // namespace atfmag::nn
