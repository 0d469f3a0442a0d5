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
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "atfmag/autoencoder.hpp"
#include "atfmag/classical.hpp"
#include "atfmag/dataset.hpp"
#include "atfmag/neural_field.hpp"

namespace atfmag {

enum class Method { proposed, nf, krr, zero };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Uniform draw of `count` distinct target indices. Draws for one seed are
/// nested: the first k indices of a larger draw equal the draw of size k.
std::vector<std::size_t> sample_measurements(std::size_t num_targets, std::size_t count, std::uint64_t seed);
std::vector<std::size_t> sample_measurements(const PositionSet& targets, std::size_t count, std::uint64_t seed);

/// Seed of the measurement draw for one (evaluation seed, source). It does
/// not depend on the method, so every method sees the same positions.
std::uint64_t measurement_seed(std::uint64_t seed, std::size_t source);

enum class StorePolicy { all, first_seed, none };

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  /// Dataset directory; gen-data writes it from `data`.
  std::filesystem::path dataset;
  DatasetConfig data = DatasetConfig::desk_scale();
  std::filesystem::path output;
  std::vector<Method> methods{Method::proposed, Method::nf, Method::krr};
  std::vector<std::size_t> counts{5, 10, 20, 50, 100};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  /// Expected split sizes; all zero means "whatever the dataset records".
  SplitSizes split;
  std::size_t workers = 1;
  std::uint64_t train_seed = 1;
  StorePolicy store_estimates = StorePolicy::all;
  /// Method name -> checkpoint path; missing entries default to
  /// <output>/checkpoints/<method>.ckpt.
  std::map<std::string, std::filesystem::path> checkpoints;
  AeConfig ae = AeConfig::desk();
  NfConfig nf = NfConfig::desk();
  KernelConfig krr;

  std::filesystem::path checkpoint_path(Method m) const;
  /// Throws std::invalid_argument when the config is inconsistent with itself
  /// or (when given) with the dataset.
  void validate(const AtfDataset* dataset = nullptr) const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Hash of the canonical JSON form (hex, 16 digits).
std::string config_hash(const ExperimentConfig& c);

/// Error with an optional source line (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Applies "a.b.c=value". The value is parsed as JSON, falling back to a
/// plain string. The key must exist in `reference`.
void apply_override(nlohmann::json& config, const std::string& assignment, const nlohmann::json& reference);

/// Reads a config file, checks every key and value type against the
/// defaults, applies overrides and validates. Errors carry the file line of
/// the offending key where it can be found.
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Estimator for one method: estimates[n * F + f] for every target of one source.
class MethodRunner {
 public:
  virtual ~MethodRunner() = default;
  virtual Method method() const = 0;
  virtual std::vector<double> estimate(const AtfDataset& dataset, std::size_t source,
                                       std::span<const std::size_t> measurements) const = 0;
};

std::unique_ptr<MethodRunner> make_krr_runner(const KernelConfig& config);
std::unique_ptr<MethodRunner> make_proposed_runner(ConditionedAutoencoder model, std::size_t workers = 1);
std::unique_ptr<MethodRunner> make_nf_runner(NeuralField model);
std::unique_ptr<MethodRunner> make_zero_runner();

/// Mean over targets of sqrt(mean_f (est - truth)^2 + eps) for one source.
double source_lsd(std::span<const double> estimates, const AtfDataset& dataset, std::size_t source);

struct CellResult {
  Method method = Method::krr;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> sources;
  std::vector<double> per_source_lsd;
  double mean_lsd = 0.0;
  double std_lsd = 0.0;  // across test sources
  double runtime_seconds = 0.0;
  /// [sources, N, F] when stored, else empty.
  std::vector<double> estimates;
  std::string estimates_file;  // relative to the report directory

  std::span<const double> source_estimates(std::size_t source, std::size_t per_source) const;
};

struct SummaryRow {
  Method method = Method::krr;
  std::size_t count = 0;
  std::size_t seeds = 0;
  double mean_lsd = 0.0;         // mean of cell means
  double std_over_seeds = 0.0;   // spread of cell means
  double std_over_sources = 0.0; // mean of the per-cell source spreads
};

struct EstimateReport {
  std::string config_hash;
  std::string dataset_fingerprint;
  nlohmann::json config;  // effective config snapshot
  std::vector<CellResult> cells;

  std::vector<SummaryRow> summary() const;
  const CellResult& cell(Method m, std::size_t count, std::uint64_t seed) const;
};

struct EvaluationOptions {
  std::size_t workers = 1;
  StorePolicy store = StorePolicy::all;
  /// Called once per finished cell, serialised.
  std::function<void(const CellResult&)> on_cell;
};

/// Runs every (method, count, seed) cell over the test split. Measurement
/// sets are shared by all methods for a given (seed, source).
EstimateReport evaluate(const AtfDataset& dataset, std::span<const MethodRunner* const> runners,
                        std::span<const std::size_t> counts, std::span<const std::uint64_t> seeds,
                        const EvaluationOptions& options = {});

EstimateReport evaluate_method(const MethodRunner& runner, const AtfDataset& dataset, std::span<const std::size_t> counts,
                               std::span<const std::uint64_t> seeds, const EvaluationOptions& options = {});

/// Report store: report.json, summary.csv and estimates/*.f64.
void write_report(const EstimateReport& report, const std::filesystem::path& directory);
EstimateReport read_report(const std::filesystem::path& directory, bool load_estimates = true);

/// Estimate tensor file: "ATFMEST1", u64 config hash, u32 rank, u64 dims, float64-le values.
void write_estimate_file(const std::filesystem::path& path, std::uint64_t hash, const std::vector<std::uint64_t>& shape,
                         std::span<const double> values);
std::vector<double> read_estimate_file(const std::filesystem::path& path, std::uint64_t* hash = nullptr,
                                       std::vector<std::uint64_t>* shape = nullptr);

/// Index of the target at `position` (within `tolerance` metres); throws
/// std::invalid_argument("unknown position") otherwise.
std::size_t find_target(const AtfDataset& dataset, const Vec3& position, double tolerance = 1e-9);
/// Index of the frequency bin at `hz` (within 1e-6 Hz).
std::size_t frequency_bin(const AtfDataset& dataset, double hz);

struct SpectrumSlice {
  std::size_t target = 0;
  std::size_t source = 0;
  std::vector<double> frequencies;
  std::vector<double> truth;
  std::vector<double> estimate;
};

SpectrumSlice spectrum_slice(const AtfDataset& dataset, const CellResult& cell, const Vec3& position, std::size_t source);

/// Grid of the targets on a plane of constant z, with coordinates relative to
/// the centre of the target region. values[ix * ny + iy].
struct PlaneSlice {
  std::size_t bin = 0;
  std::size_t source = 0;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> truth;
  std::vector<double> estimate;
};

/// `z` is relative to the centre of the target region; throws
/// std::invalid_argument("off-grid plane") if no target lies on it.
PlaneSlice plane_slice(const AtfDataset& dataset, const CellResult& cell, std::size_t source, double z, double hz);

}  // namespace atfmag
