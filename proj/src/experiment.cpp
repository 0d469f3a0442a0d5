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

#include "atfmag/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "atfmag/binary_io.hpp"
#include "atfmag/json_io.hpp"
#include "atfmag/nn/ops.hpp"
#include "atfmag/parallel.hpp"
#include "atfmag/rng.hpp"

namespace atfmag {

std::string to_string(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::nf: return "nf";
    case Method::krr: return "krr";
    case Method::zero: return "zero";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "proposed") return Method::proposed;
  if (s == "nf") return Method::nf;
  if (s == "krr") return Method::krr;
  if (s == "zero") return Method::zero;
  throw std::invalid_argument("unknown method '" + s + "' (expected proposed, nf, krr or zero)");
}

namespace {

std::string to_string(StorePolicy p) {
  switch (p) {
    case StorePolicy::all: return "all";
    case StorePolicy::first_seed: return "first_seed";
    case StorePolicy::none: return "none";
  }
  return "?";
}

StorePolicy store_policy_from_string(const std::string& s) {
  if (s == "all") return StorePolicy::all;
  if (s == "first_seed") return StorePolicy::first_seed;
  if (s == "none") return StorePolicy::none;
  throw std::invalid_argument("unknown store_estimates '" + s + "' (expected all, first_seed or none)");
}

}  // namespace

std::vector<std::size_t> sample_measurements(std::size_t num_targets, std::size_t count, std::uint64_t seed) {
  if (count > num_targets)
    throw std::invalid_argument("M > N: cannot draw " + std::to_string(count) + " measurements from " +
                                std::to_string(num_targets) + " targets");
  Rng rng = Rng::derive(seed, "measurements");
  return rng.sample_without_replacement(num_targets, count);
}

std::vector<std::size_t> sample_measurements(const PositionSet& targets, std::size_t count, std::uint64_t seed) {
  return sample_measurements(targets.size(), count, seed);
}

std::uint64_t measurement_seed(std::uint64_t seed, std::size_t source) {
  return mix64(seed ^ mix64(0x6d65617375726573ull + static_cast<std::uint64_t>(source)));
}

// ---------------------------------------------------------------------------
// config

std::filesystem::path ExperimentConfig::checkpoint_path(Method m) const {
  if (auto it = checkpoints.find(to_string(m)); it != checkpoints.end()) return it->second;
  return output / "checkpoints" / (to_string(m) + ".ckpt");
}

void ExperimentConfig::validate(const AtfDataset* ds) const {
  if (methods.empty()) throw std::invalid_argument("methods must not be empty");
  std::set<Method> unique(methods.begin(), methods.end());
  if (unique.size() != methods.size()) throw std::invalid_argument("methods must not repeat");
  if (counts.empty()) throw std::invalid_argument("counts must not be empty");
  for (auto m : counts)
    if (m < 1) throw std::invalid_argument("counts must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  for (const auto& [name, path] : checkpoints) method_from_string(name);
  ae.validate();
  nf.validate();
  krr.validate();
  const std::size_t g = data.grid_points_per_axis;
  // without a dataset, check against the one `data` would generate
  const std::size_t N = ds ? ds->num_targets() : g * g * g;
  for (auto m : counts)
    if (m > N) throw std::invalid_argument("M > N: count " + std::to_string(m) + " exceeds " + std::to_string(N) + " targets");
  for (auto m : ae.training_counts)
    if (m > N) throw std::invalid_argument("ae.training_counts entry " + std::to_string(m) + " exceeds target count");
  if (!ds) return;
  const std::size_t L = ds->num_sources();
  const bool split_given = split.train + split.validation + split.test > 0;
  if (split_given) {
    if (split.train + split.validation + split.test != L)
      throw std::invalid_argument("split sizes sum to " + std::to_string(split.train + split.validation + split.test) +
                                  " but the dataset has " + std::to_string(L) + " sources");
    if (ds->split.count(Split::train) != split.train || ds->split.count(Split::validation) != split.validation ||
        ds->split.count(Split::test) != split.test)
      throw std::invalid_argument("split sizes do not match the dataset's split assignment");
  }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  nlohmann::json checkpoints = nlohmann::json::object();
  for (const auto& [k, v] : c.checkpoints) checkpoints[k] = v.string();
  j = nlohmann::json{{"name", c.name},
                     {"dataset", c.dataset.string()},
                     {"data", c.data},
                     {"output", c.output.string()},
                     {"methods", methods},
                     {"counts", c.counts},
                     {"seeds", c.seeds},
                     {"split", {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}}},
                     {"workers", c.workers},
                     {"train_seed", c.train_seed},
                     {"store_estimates", to_string(c.store_estimates)},
                     {"checkpoints", checkpoints},
                     {"ae", c.ae},
                     {"nf", c.nf},
                     {"krr", c.krr}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  read_optional(j, "name", c.name);
  if (auto it = j.find("dataset"); it != j.end()) c.dataset = it->get<std::string>();
  read_optional(j, "data", c.data);
  if (auto it = j.find("output"); it != j.end()) c.output = it->get<std::string>();
  if (auto it = j.find("methods"); it != j.end()) {
    c.methods.clear();
    for (const auto& m : *it) c.methods.push_back(method_from_string(m.get<std::string>()));
  }
  read_optional(j, "counts", c.counts);
  read_optional(j, "seeds", c.seeds);
  if (auto it = j.find("split"); it != j.end()) {
    read_optional(*it, "train", c.split.train);
    read_optional(*it, "validation", c.split.validation);
    read_optional(*it, "test", c.split.test);
  }
  read_optional(j, "workers", c.workers);
  read_optional(j, "train_seed", c.train_seed);
  if (auto it = j.find("store_estimates"); it != j.end())
    c.store_estimates = store_policy_from_string(it->get<std::string>());
  if (auto it = j.find("checkpoints"); it != j.end())
    for (const auto& [k, v] : it->items()) c.checkpoints[k] = v.get<std::string>();
  read_optional(j, "ae", c.ae);
  read_optional(j, "nf", c.nf);
  read_optional(j, "krr", c.krr);
}

std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = c;
  // neither changes any result
  j.erase("workers");
  j.erase("output");
  return hex64(json_hash(j));
}

ConfigError::ConfigError(const std::string& where, std::size_t line, const std::string& what)
    : std::runtime_error(where + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what), line_(line) {}

namespace {

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  return parts;
}

std::string join_path(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ".") + p;
  return out;
}

// Line of the last component of `path`, searching for each key after the
// previous one. 0 when not found.
std::size_t find_key_line(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    pos = text.find("\"" + key + "\"", pos);
    if (pos == std::string::npos) return 0;
  }
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
}

const char* kind(const nlohmann::json& v) {
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

struct SchemaIssue {
  std::vector<std::string> path;
  std::string message;
};

// Every key of `value` must exist in `reference` with a value of the same kind.
// An empty reference object is a free-form map of strings.
void check_schema(const nlohmann::json& value, const nlohmann::json& reference, std::vector<std::string>& path,
                  std::vector<SchemaIssue>& issues) {
  if (std::strcmp(kind(value), kind(reference)) != 0) {
    issues.push_back({path, "'" + join_path(path) + "': expected " + kind(reference) + ", found " + kind(value)});
    return;
  }
  if (reference.is_object()) {
    for (const auto& [key, v] : value.items()) {
      path.push_back(key);
      if (reference.empty()) {
        if (!v.is_string()) issues.push_back({path, "'" + join_path(path) + "': expected string, found " + kind(v)});
      } else if (!reference.contains(key)) {
        issues.push_back({path, "unknown key '" + join_path(path) + "'"});
      } else {
        check_schema(v, reference.at(key), path, issues);
      }
      path.pop_back();
    }
  } else if (reference.is_array() && !reference.empty() && !reference.front().is_structured()) {
    for (std::size_t i = 0; i < value.size(); ++i)
      if (std::strcmp(kind(value[i]), kind(reference.front())) != 0)
        issues.push_back({path, "'" + join_path(path) + "' element " + std::to_string(i) + ": expected " + kind(reference.front()) + ", found " +
                                    kind(value[i])});
  }
}

}  // namespace

void apply_override(nlohmann::json& config, const std::string& assignment, const nlohmann::json& reference) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override '" + assignment + "' is not key=value");
  const auto path = split_path(assignment.substr(0, eq));
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  const nlohmann::json* ref = &reference;
  nlohmann::json* target = &config;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const bool free_map = ref->is_object() && ref->empty();
    if (!ref->is_object() || (!free_map && !ref->contains(path[i])))
      throw std::invalid_argument("unknown config key '" + assignment.substr(0, eq) + "'");
    if (!target->is_object()) *target = nlohmann::json::object();
    target = &(*target)[path[i]];
    if (free_map) {
      if (i + 1 != path.size()) throw std::invalid_argument("unknown config key '" + assignment.substr(0, eq) + "'");
      if (!value.is_string()) value = text;
      break;
    }
    ref = &ref->at(path[i]);
  }
  if (!(ref->is_object() && ref->empty())) {
    if (ref->is_string() && !value.is_string()) value = text;
    std::vector<std::string> p;
    std::vector<SchemaIssue> issues;
    check_schema(value, *ref, p, issues);
    if (!issues.empty())
      throw std::invalid_argument("override '" + assignment.substr(0, eq) + "': " + issues.front().message);
  }
  *target = value;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  const std::string where = path.string();
  std::ifstream in(path);
  if (!in) throw ConfigError(where, 0, "missing config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  nlohmann::json user;
  try {
    user = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n')) + 1;
    throw ConfigError(where, line, std::string("syntax error: ") + e.what());
  }
  if (!user.is_object()) throw ConfigError(where, 1, "top level must be an object");

  const nlohmann::json reference = ExperimentConfig{};
  std::vector<std::string> p;
  std::vector<SchemaIssue> issues;
  check_schema(user, reference, p, issues);
  if (!issues.empty()) throw ConfigError(where, find_key_line(text, issues.front().path), issues.front().message);

  for (const auto& o : overrides) {
    try {
      apply_override(user, o, reference);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("command line", 0, e.what());
    }
  }

  ExperimentConfig c;
  try {
    c = user.get<ExperimentConfig>();
    c.validate();
  } catch (const std::exception& e) {
    // point at the first key the message names, if any
    std::size_t line = 0;
    for (const auto& [key, v] : user.items())
      if (std::string(e.what()).find(key) != std::string::npos) line = find_key_line(text, {key});
    throw ConfigError(where, line, e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// methods

namespace {

class KrrRunner final : public MethodRunner {
 public:
  explicit KrrRunner(const KernelConfig& c) : config_(c) { config_.validate(); }
  Method method() const override { return Method::krr; }
  std::vector<double> estimate(const AtfDataset& ds, std::size_t l, std::span<const std::size_t> meas) const override {
    const auto obs = observe(ds, l, meas);
    const auto F = static_cast<Eigen::Index>(ds.num_bins());
    const auto M = static_cast<Eigen::Index>(obs.count());
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::MatrixXd values = Eigen::Map<const RowMajor>(obs.values.data(), M, F);
    const KrrEstimator krr(obs.positions, config_);
    const RowMajor est = krr.predict(ds.targets.coords, values);
    return {est.data(), est.data() + est.size()};
  }

 private:
  KernelConfig config_;
};

class ProposedRunner final : public MethodRunner {
 public:
  ProposedRunner(ConditionedAutoencoder m, std::size_t workers) : model_(std::move(m)) { options_.workers = workers; }
  Method method() const override { return Method::proposed; }
  std::vector<double> estimate(const AtfDataset& ds, std::size_t l, std::span<const std::size_t> meas) const override {
    return ae_predict(model_, observe(ds, l, meas), ds.sources.coords[l], ds.targets.coords, ds.frequencies, options_);
  }

 private:
  ConditionedAutoencoder model_;
  AePredictOptions options_;
};

class NfRunner final : public MethodRunner {
 public:
  explicit NfRunner(NeuralField m) : model_(std::move(m)) {}
  Method method() const override { return Method::nf; }
  std::vector<double> estimate(const AtfDataset& ds, std::size_t l, std::span<const std::size_t> meas) const override {
    return nf_adapt_and_predict(model_, observe(ds, l, meas), ds.sources.coords[l], ds.targets.coords, ds.frequencies);
  }

 private:
  NeuralField model_;
};

class ZeroRunner final : public MethodRunner {
 public:
  Method method() const override { return Method::zero; }
  std::vector<double> estimate(const AtfDataset& ds, std::size_t, std::span<const std::size_t>) const override {
    return std::vector<double>(ds.num_targets() * ds.num_bins(), 0.0);
  }
};

}  // namespace

std::unique_ptr<MethodRunner> make_krr_runner(const KernelConfig& config) { return std::make_unique<KrrRunner>(config); }
std::unique_ptr<MethodRunner> make_proposed_runner(ConditionedAutoencoder model, std::size_t workers) {
  return std::make_unique<ProposedRunner>(std::move(model), workers);
}
std::unique_ptr<MethodRunner> make_nf_runner(NeuralField model) { return std::make_unique<NfRunner>(std::move(model)); }
std::unique_ptr<MethodRunner> make_zero_runner() { return std::make_unique<ZeroRunner>(); }

double source_lsd(std::span<const double> est, const AtfDataset& ds, std::size_t l) {
  const std::size_t N = ds.num_targets(), F = ds.num_bins();
  if (est.size() != N * F) throw std::invalid_argument("estimate size does not match N x F");
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    auto truth = ds.spectrum(n, l);
    double acc = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const double d = est[n * F + f] - static_cast<double>(truth[f]);
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(F));
  }
  return total / static_cast<double>(N);
}

// ---------------------------------------------------------------------------
// evaluation

std::span<const double> CellResult::source_estimates(std::size_t source, std::size_t per_source) const {
  if (estimates.empty()) throw std::invalid_argument("estimates were not stored for this cell");
  auto it = std::find(sources.begin(), sources.end(), source);
  if (it == sources.end()) throw std::invalid_argument("source " + std::to_string(source) + " is not in this cell");
  const auto k = static_cast<std::size_t>(it - sources.begin());
  if (estimates.size() != sources.size() * per_source) throw std::invalid_argument("stored estimates have the wrong size");
  return {estimates.data() + k * per_source, per_source};
}

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

std::vector<SummaryRow> EstimateReport::summary() const {
  std::vector<SummaryRow> rows;
  for (const auto& c : cells) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) { return r.method == c.method && r.count == c.count; });
    if (it == rows.end()) rows.push_back({c.method, c.count, 0, 0.0, 0.0, 0.0});
  }
  for (auto& r : rows) {
    std::vector<double> means, spreads;
    for (const auto& c : cells)
      if (c.method == r.method && c.count == r.count) {
        means.push_back(c.mean_lsd);
        spreads.push_back(c.std_lsd);
      }
    r.seeds = means.size();
    r.mean_lsd = mean_of(means);
    r.std_over_seeds = std_of(means);
    r.std_over_sources = mean_of(spreads);
  }
  return rows;
}

const CellResult& EstimateReport::cell(Method m, std::size_t count, std::uint64_t seed) const {
  for (const auto& c : cells)
    if (c.method == m && c.count == count && c.seed == seed) return c;
  throw std::out_of_range("no cell for " + to_string(m) + " M=" + std::to_string(count) + " seed " + std::to_string(seed));
}

EstimateReport evaluate(const AtfDataset& ds, std::span<const MethodRunner* const> runners,
                        std::span<const std::size_t> counts, std::span<const std::uint64_t> seeds,
                        const EvaluationOptions& options) {
  const auto test = ds.split.indices(Split::test);
  if (test.empty()) throw std::invalid_argument("test split is empty");
  for (auto m : counts)
    if (m > ds.num_targets()) sample_measurements(ds.num_targets(), m, 0);  // throws the M > N error

  struct Job {
    const MethodRunner* runner;
    std::size_t count;
    std::size_t seed_index;
  };
  std::vector<Job> jobs;
  for (const MethodRunner* r : runners)
    for (std::size_t m : counts)
      for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({r, m, s});

  EstimateReport report;
  report.dataset_fingerprint = hex64(ds.fingerprint());
  report.cells.resize(jobs.size());
  std::mutex store;
  const std::size_t per_source = ds.num_targets() * ds.num_bins();

  parallel_for(jobs.size(), options.workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    CellResult cell;
    cell.method = job.runner->method();
    cell.count = job.count;
    cell.seed = seeds[job.seed_index];
    cell.sources = test;
    const bool keep = options.store == StorePolicy::all || (options.store == StorePolicy::first_seed && job.seed_index == 0);
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t l : test) {
      const auto meas = sample_measurements(ds.num_targets(), job.count, measurement_seed(cell.seed, l));
      const auto est = job.runner->estimate(ds, l, meas);
      cell.per_source_lsd.push_back(source_lsd(est, ds, l));
      if (keep) cell.estimates.insert(cell.estimates.end(), est.begin(), est.end());
    }
    cell.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    cell.mean_lsd = mean_of(cell.per_source_lsd);
    cell.std_lsd = std_of(cell.per_source_lsd);
    if (keep)
      cell.estimates_file = "estimates/" + to_string(cell.method) + "_M" + std::to_string(cell.count) + "_seed" +
                            std::to_string(cell.seed) + ".f64";
    (void)per_source;
    std::lock_guard<std::mutex> lock(store);
    report.cells[j] = std::move(cell);
    if (options.on_cell) options.on_cell(report.cells[j]);
  });
  return report;
}

EstimateReport evaluate_method(const MethodRunner& runner, const AtfDataset& ds, std::span<const std::size_t> counts,
                               std::span<const std::uint64_t> seeds, const EvaluationOptions& options) {
  const MethodRunner* one[] = {&runner};
  return evaluate(ds, one, counts, seeds, options);
}

// ---------------------------------------------------------------------------
// report store

namespace {
constexpr char kEstimateMagic[8] = {'A', 'T', 'F', 'M', 'E', 'S', 'T', '1'};
constexpr int kReportFormatVersion = 1;

std::uint64_t parse_hash(const std::string& hex) {
  return hex.empty() ? 0 : std::stoull(hex, nullptr, 16);
}
}  // namespace

void write_estimate_file(const std::filesystem::path& path, std::uint64_t hash, const std::vector<std::uint64_t>& shape,
                         std::span<const double> values) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kEstimateMagic, sizeof(kEstimateMagic));
  binary::write<std::uint64_t>(out, hash);
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) binary::write<std::uint64_t>(out, d);
  binary::write_array(out, values);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<double> read_estimate_file(const std::filesystem::path& path, std::uint64_t* hash,
                                       std::vector<std::uint64_t>* shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing estimate file: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kEstimateMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + ": not an estimate file");
  const auto h = binary::read<std::uint64_t>(in);
  const auto rank = binary::read<std::uint32_t>(in);
  if (rank > 8) throw std::runtime_error(path.string() + ": corrupt header");
  std::vector<std::uint64_t> dims(rank);
  std::uint64_t size = 1;
  for (auto& d : dims) {
    d = binary::read<std::uint64_t>(in);
    size *= d;
  }
  std::vector<double> values(size);
  binary::read_array(in, std::span<double>(values));
  if (hash) *hash = h;
  if (shape) *shape = dims;
  return values;
}

void write_report(const EstimateReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json cells = nlohmann::json::array();
  const std::uint64_t hash = parse_hash(report.config_hash);
  for (const auto& c : report.cells) {
    if (!c.estimates.empty()) {
      const std::uint64_t S = c.sources.size();
      const std::uint64_t per = S ? c.estimates.size() / S : 0;
      write_estimate_file(dir / c.estimates_file, hash, {S, per}, c.estimates);
    }
    cells.push_back({{"method", to_string(c.method)},
                     {"count", c.count},
                     {"seed", c.seed},
                     {"sources", c.sources},
                     {"per_source_lsd", c.per_source_lsd},
                     {"mean_lsd", c.mean_lsd},
                     {"std_lsd", c.std_lsd},
                     {"runtime_seconds", c.runtime_seconds},
                     {"estimates", c.estimates.empty() ? nlohmann::json() : nlohmann::json(c.estimates_file)}});
  }
  nlohmann::json summary = nlohmann::json::array();
  std::ofstream csv(dir / "summary.csv");
  csv << "method,count,seeds,mean_lsd,std_over_seeds,std_over_sources,config_hash\n";
  csv.precision(17);
  for (const auto& r : report.summary()) {
    summary.push_back({{"method", to_string(r.method)},
                       {"count", r.count},
                       {"seeds", r.seeds},
                       {"mean_lsd", r.mean_lsd},
                       {"std_over_seeds", r.std_over_seeds},
                       {"std_over_sources", r.std_over_sources}});
    csv << to_string(r.method) << ',' << r.count << ',' << r.seeds << ',' << r.mean_lsd << ',' << r.std_over_seeds << ','
        << r.std_over_sources << ',' << report.config_hash << '\n';
  }
  if (!csv) throw std::runtime_error("failed writing " + (dir / "summary.csv").string());
  write_json_file(dir / "report.json", {{"format_version", kReportFormatVersion},
                                         {"config_hash", report.config_hash},
                                         {"dataset_fingerprint", report.dataset_fingerprint},
                                         {"config", report.config},
                                         {"cells", cells},
                                         {"summary", summary}});
}

EstimateReport read_report(const std::filesystem::path& dir, bool load_estimates) {
  const auto path = dir / "report.json";
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing report: " + path.string());
  const auto j = read_json_file(path);
  if (j.value("format_version", 0) != kReportFormatVersion)
    throw std::runtime_error(path.string() + ": unsupported report format");
  EstimateReport r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  r.config = j.at("config");
  for (const auto& c : j.at("cells")) {
    CellResult cell;
    cell.method = method_from_string(c.at("method").get<std::string>());
    cell.count = c.at("count").get<std::size_t>();
    cell.seed = c.at("seed").get<std::uint64_t>();
    cell.sources = c.at("sources").get<std::vector<std::size_t>>();
    cell.per_source_lsd = c.at("per_source_lsd").get<std::vector<double>>();
    cell.mean_lsd = c.at("mean_lsd").get<double>();
    cell.std_lsd = c.at("std_lsd").get<double>();
    cell.runtime_seconds = c.at("runtime_seconds").get<double>();
    if (!c.at("estimates").is_null()) {
      cell.estimates_file = c.at("estimates").get<std::string>();
      if (load_estimates) cell.estimates = read_estimate_file(dir / cell.estimates_file);
    }
    r.cells.push_back(std::move(cell));
  }
  return r;
}

// ---------------------------------------------------------------------------
// slices

std::size_t find_target(const AtfDataset& ds, const Vec3& position, double tolerance) {
  for (std::size_t n = 0; n < ds.num_targets(); ++n)
    if (distance(ds.targets.coords[n], position) <= tolerance) return n;
  throw std::invalid_argument("unknown position");
}

std::size_t frequency_bin(const AtfDataset& ds, double hz) {
  for (std::size_t f = 0; f < ds.num_bins(); ++f)
    if (std::abs(ds.frequencies[f] - hz) <= 1e-6) return f;
  throw std::invalid_argument("frequency " + std::to_string(hz) + " Hz is not a bin centre");
}

SpectrumSlice spectrum_slice(const AtfDataset& ds, const CellResult& cell, const Vec3& position, std::size_t source) {
  SpectrumSlice s;
  s.target = find_target(ds, position);
  s.source = source;
  s.frequencies = ds.frequencies;
  const std::size_t F = ds.num_bins();
  auto truth = ds.spectrum(s.target, source);
  s.truth.assign(truth.begin(), truth.end());
  auto est = cell.source_estimates(source, ds.num_targets() * F);
  s.estimate.assign(est.begin() + static_cast<std::ptrdiff_t>(s.target * F),
                    est.begin() + static_cast<std::ptrdiff_t>((s.target + 1) * F));
  return s;
}

PlaneSlice plane_slice(const AtfDataset& ds, const CellResult& cell, std::size_t source, double z, double hz) {
  const Vec3 centre = ds.config.target_region.center;
  constexpr double tol = 1e-9;
  PlaneSlice p;
  p.bin = frequency_bin(ds, hz);
  p.source = source;
  std::vector<std::size_t> on_plane;
  for (std::size_t n = 0; n < ds.num_targets(); ++n)
    if (std::abs(ds.targets.coords[n][2] - centre[2] - z) <= tol) on_plane.push_back(n);
  if (on_plane.empty()) throw std::invalid_argument("off-grid plane");
  auto axis_values = [&](int axis) {
    std::vector<double> v;
    for (std::size_t n : on_plane) {
      const double c = ds.targets.coords[n][axis] - centre[axis];
      if (std::none_of(v.begin(), v.end(), [&](double x) { return std::abs(x - c) <= tol; })) v.push_back(c);
    }
    std::sort(v.begin(), v.end());
    return v;
  };
  p.xs = axis_values(0);
  p.ys = axis_values(1);
  if (p.xs.size() * p.ys.size() != on_plane.size()) throw std::invalid_argument("targets on the plane do not form a grid");
  const std::size_t F = ds.num_bins();
  const auto est = cell.estimates.empty() ? std::span<const double>() : cell.source_estimates(source, ds.num_targets() * F);
  p.truth.assign(on_plane.size(), 0.0);
  if (!est.empty()) p.estimate.assign(on_plane.size(), 0.0);
  auto locate = [tol](const std::vector<double>& axis, double c) {
    return static_cast<std::size_t>(std::find_if(axis.begin(), axis.end(), [&](double x) { return std::abs(x - c) <= tol; }) -
                                    axis.begin());
  };
  for (std::size_t n : on_plane) {
    const std::size_t ix = locate(p.xs, ds.targets.coords[n][0] - centre[0]);
    const std::size_t iy = locate(p.ys, ds.targets.coords[n][1] - centre[1]);
    p.truth[ix * p.ys.size() + iy] = ds.at(n, source, p.bin);
    if (!est.empty()) p.estimate[ix * p.ys.size() + iy] = est[n * F + p.bin];
  }
  return p;
}

}  // namespace atfmag
