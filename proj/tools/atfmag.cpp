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

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "atfmag/autoencoder.hpp"
#include "atfmag/dataset.hpp"
#include "atfmag/experiment.hpp"
#include "atfmag/json_io.hpp"
#include "atfmag/neural_field.hpp"
#include "atfmag/nn/parameters.hpp"
#include "atfmag/runtime.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using namespace atfmag;

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadConfig = 2, kMissing = 3 };

struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string output;
  bool force = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "Experiment config (JSON)")->required();
  app->add_option("-s,--set", c.overrides, "Override a config value, e.g. --set ae.epochs=10");
  app->add_option("--seed", c.seed, "Seed for this stage");
  app->add_option("-o,--output", c.output, "Output directory (overrides the config)");
  app->add_flag("-f,--force", c.force, "Redo the stage even when its outputs are up to date");
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = load_experiment_config(c.config, c.overrides);
  if (!c.output.empty()) {
    cfg.output = c.output;
  } else if (cfg.output.empty()) {
    const char* root = std::getenv("ATFMAG_OUTPUT_ROOT");
    cfg.output = fs::path(root && *root ? root : "runs") / cfg.name;
  }
  if (cfg.dataset.empty()) cfg.dataset = cfg.output / "dataset";
  return cfg;
}

// Each artifact gets a sidecar holding the effective config and the hash of
// everything the artifact depends on. A matching hash makes the stage a no-op.
void write_stamp(const fs::path& path, const std::string& stage_hash, const ExperimentConfig& cfg, Json extra = {}) {
  Json j{{"stage_hash", stage_hash}, {"config_hash", config_hash(cfg)}, {"config", cfg}};
  if (extra.is_object())
    for (auto& [k, v] : extra.items()) j[k] = v;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_json_file(path, j);
}

std::optional<Json> read_stamp(const fs::path& path, const std::string& stage_hash) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    Json j = read_json_file(path);
    if (j.value("stage_hash", "") == stage_hash) return j;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

AtfDataset require_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) throw MissingInput("missing dataset: " + dir.string() + " (run gen-data first)");
  return load_dataset(dir);
}

void require_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInput("missing checkpoint: " + path.string() + " (run train first)");
}

std::string human_seconds(double s) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(1) << s << " s";
  return o.str();
}

// ---------------------------------------------------------------------------

int run_gen_data(const Common& common) {
  ExperimentConfig cfg = load_config(common);
  if (common.seed) cfg.data.seed = *common.seed;
  cfg.data.workers = cfg.workers;
  const std::string hash = hex64(json_hash(Json(cfg.data)));
  const fs::path stamp = cfg.dataset / "effective_config.json";
  if (!common.force)
    if (auto s = read_stamp(stamp, hash)) {
      const AtfDataset ds = load_dataset(cfg.dataset);
      if (hex64(ds.fingerprint()) == s->value("dataset_fingerprint", "")) {
        std::cout << "dataset up to date: " << cfg.dataset.string() << "\n";
        return kOk;
      }
    }
  std::cout << "simulating " << cfg.data.grid_points_per_axis * cfg.data.grid_points_per_axis * cfg.data.grid_points_per_axis
            << " targets x " << cfg.data.num_sources << " sources\n";
  const auto start = std::chrono::steady_clock::now();
  const AtfDataset ds = generate_dataset(cfg.data);
  save_dataset(ds, cfg.dataset);
  const AtfDataset check = load_dataset(cfg.dataset);
  if (check.fingerprint() != ds.fingerprint()) throw std::runtime_error("dataset did not survive a save/load round trip");
  write_stamp(stamp, hash, cfg, {{"dataset_fingerprint", hex64(ds.fingerprint())}});
  std::cout << "wrote " << cfg.dataset.string() << " (N=" << ds.num_targets() << ", L=" << ds.num_sources()
            << ", F=" << ds.num_bins() << ", fingerprint " << hex64(ds.fingerprint()) << ") in "
            << human_seconds(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()) << "\n";
  return kOk;
}

std::string train_hash(const ExperimentConfig& cfg, Method m, const AtfDataset& ds) {
  Json j{{"method", to_string(m)}, {"train_seed", cfg.train_seed}, {"dataset_fingerprint", hex64(ds.fingerprint())}};
  j["model"] = m == Method::proposed ? Json(cfg.ae) : Json(cfg.nf);
  return hex64(json_hash(j));
}

int run_train(const Common& common, const std::vector<std::string>& method_names, std::size_t log_every) {
  ExperimentConfig cfg = load_config(common);
  if (common.seed) cfg.train_seed = *common.seed;
  std::vector<Method> methods;
  for (const auto& n : method_names) methods.push_back(method_from_string(n));
  if (methods.empty())
    for (Method m : cfg.methods)
      if (m == Method::proposed || m == Method::nf) methods.push_back(m);
  for (Method m : methods)
    if (m != Method::proposed && m != Method::nf)
      throw std::invalid_argument(to_string(m) + " has nothing to train");

  const AtfDataset ds = require_dataset(cfg.dataset);
  cfg.validate(&ds);
  for (Method m : methods) {
    const fs::path ckpt = cfg.checkpoint_path(m);
    const fs::path stamp = fs::path(ckpt.string() + ".config.json");
    const std::string hash = train_hash(cfg, m, ds);
    if (!common.force && fs::exists(ckpt) && read_stamp(stamp, hash)) {
      std::cout << to_string(m) << " checkpoint up to date: " << ckpt.string() << "\n";
      continue;
    }
    auto log = [&](const EpochRecord& r, const nn::ModelParameters&) {
      if (log_every > 0 && (r.epoch % log_every == 0 || r.epoch == 1))
        std::cerr << to_string(m) << " epoch " << r.epoch << " lr " << r.learning_rate << " train " << r.train_loss
                  << " val " << r.validation_loss << "\n";
    };
    const auto start = std::chrono::steady_clock::now();
    Json extra{{"stage_hash", hash}, {"train_seed", cfg.train_seed}, {"dataset_fingerprint", hex64(ds.fingerprint())}};
    std::uint64_t params_hash = 0;
    fs::create_directories(ckpt.parent_path());
    if (m == Method::proposed) {
      auto result = ae_train(ds, cfg.ae, cfg.train_seed, log);
      extra["history"] = result.history;
      result.model.save(ckpt, extra);
      params_hash = result.model.params().hash();
      if (ConditionedAutoencoder::load(ckpt).params().hash() != params_hash)
        throw std::runtime_error("checkpoint did not survive a save/load round trip: " + ckpt.string());
      std::cout << "proposed: best epoch " << result.history.best_epoch << ", validation LSD "
                << result.history.best_validation_loss << " dB\n";
    } else {
      auto result = nf_train(ds, cfg.nf, cfg.train_seed, log);
      extra["history"] = result.history;
      result.model.save(ckpt, extra);
      params_hash = result.model.params().hash();
      if (NeuralField::load(ckpt).params().hash() != params_hash)
        throw std::runtime_error("checkpoint did not survive a save/load round trip: " + ckpt.string());
      std::cout << "nf: final training LSD " << result.history.epochs.back().train_loss << " dB\n";
    }
    write_stamp(stamp, hash, cfg, {{"parameter_hash", hex64(params_hash)}});
    std::cout << "wrote " << ckpt.string() << " in "
              << human_seconds(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()) << "\n";
  }
  return kOk;
}

std::unique_ptr<MethodRunner> make_runner(const ExperimentConfig& cfg, Method m, Json& provenance) {
  switch (m) {
    case Method::krr: return make_krr_runner(cfg.krr);
    case Method::zero: return make_zero_runner();
    case Method::proposed: {
      const fs::path ckpt = cfg.checkpoint_path(m);
      require_checkpoint(ckpt);
      auto model = ConditionedAutoencoder::load(ckpt);
      provenance[to_string(m)] = hex64(model.params().hash());
      return make_proposed_runner(std::move(model), 1);
    }
    case Method::nf: {
      const fs::path ckpt = cfg.checkpoint_path(m);
      require_checkpoint(ckpt);
      auto model = NeuralField::load(ckpt);
      provenance[to_string(m)] = hex64(model.params().hash());
      return make_nf_runner(std::move(model));
    }
  }
  throw std::logic_error("unreachable");
}

// Reported means must equal a recomputation from the stored estimates.
void verify_report(const fs::path& dir, const AtfDataset& ds) {
  const EstimateReport r = read_report(dir, true);
  const std::size_t per = ds.num_targets() * ds.num_bins();
  for (const auto& c : r.cells) {
    if (c.estimates.empty()) continue;
    double sum = 0.0;
    for (std::size_t l : c.sources) sum += source_lsd(c.source_estimates(l, per), ds, l);
    const double mean = sum / static_cast<double>(c.sources.size());
    if (!(std::abs(mean - c.mean_lsd) <= 1e-10))
      throw std::runtime_error("report validation failed for " + c.estimates_file);
  }
}

int run_evaluate(const Common& common, std::vector<Method> methods, const std::string& report_name) {
  ExperimentConfig cfg = load_config(common);
  if (common.seed) cfg.seeds = {*common.seed};
  if (methods.empty()) methods = cfg.methods;
  cfg.methods = methods;
  cfg.validate();
  const AtfDataset ds = require_dataset(cfg.dataset);
  cfg.validate(&ds);

  Json provenance = Json::object();
  std::vector<std::unique_ptr<MethodRunner>> owned;
  for (Method m : methods) owned.push_back(make_runner(cfg, m, provenance));
  std::vector<const MethodRunner*> runners;
  for (const auto& r : owned) runners.push_back(r.get());

  const fs::path dir = cfg.output / "reports" / report_name;
  const std::string hash = hex64(json_hash(Json{{"config_hash", config_hash(cfg)},
                                                {"dataset_fingerprint", hex64(ds.fingerprint())},
                                                {"checkpoints", provenance}}));
  const fs::path stamp = dir / "effective_config.json";
  if (!common.force && fs::exists(dir / "report.json") && read_stamp(stamp, hash)) {
    std::cout << "report up to date: " << dir.string() << "\n";
    return kOk;
  }

  EvaluationOptions opts;
  opts.workers = cfg.workers;
  opts.store = cfg.store_estimates;
  opts.on_cell = [](const CellResult& c) {
    std::cerr << to_string(c.method) << " M=" << c.count << " seed " << c.seed << ": " << std::fixed << std::setprecision(3)
              << c.mean_lsd << " dB (" << human_seconds(c.runtime_seconds) << ")\n"
              << std::defaultfloat;
  };
  EstimateReport report = evaluate(ds, runners, cfg.counts, cfg.seeds, opts);
  report.config_hash = config_hash(cfg);
  report.config = cfg;
  write_report(report, dir);
  verify_report(dir, ds);
  write_stamp(stamp, hash, cfg, {{"dataset_fingerprint", hex64(ds.fingerprint())}, {"checkpoints", provenance}});

  std::cout << std::left << std::setw(10) << "method" << std::setw(6) << "M" << std::setw(12) << "mean LSD"
            << std::setw(14) << "std (seeds)" << "std (sources)\n";
  for (const auto& row : report.summary())
    std::cout << std::left << std::setw(10) << to_string(row.method) << std::setw(6) << row.count << std::fixed
              << std::setprecision(3) << std::setw(12) << row.mean_lsd << std::setw(14) << row.std_over_seeds
              << row.std_over_sources << "\n"
              << std::defaultfloat;
  std::cout << "wrote " << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct PlotOptions {
  std::vector<std::string> reports;
  std::string dataset;
  std::string output;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> source;
  double z = 0.0;
  double hz = 250.0;
  bool force = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string num(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

int run_plot(const PlotOptions& po) {
  EstimateReport merged;
  Json configs = Json::array();
  std::vector<std::string> hashes;
  for (const auto& r : po.reports) {
    if (!fs::exists(fs::path(r) / "report.json")) throw MissingInput("missing report: " + (fs::path(r) / "report.json").string());
    EstimateReport rep = read_report(r, true);
    if (!merged.dataset_fingerprint.empty() && rep.dataset_fingerprint != merged.dataset_fingerprint)
      throw std::invalid_argument("reports were computed on different datasets");
    merged.dataset_fingerprint = rep.dataset_fingerprint;
    if (merged.config.is_null()) merged.config = rep.config;
    configs.push_back(rep.config);
    hashes.push_back(rep.config_hash);
    for (auto& c : rep.cells) {
      bool duplicate = false;
      for (const auto& existing : merged.cells)
        duplicate |= existing.method == c.method && existing.count == c.count && existing.seed == c.seed;
      if (!duplicate) merged.cells.push_back(std::move(c));
    }
  }
  const fs::path dataset_dir = po.dataset.empty() ? fs::path(merged.config.at("dataset").get<std::string>()) : fs::path(po.dataset);
  const AtfDataset ds = require_dataset(dataset_dir);
  if (hex64(ds.fingerprint()) != merged.dataset_fingerprint)
    throw std::invalid_argument("dataset " + dataset_dir.string() + " does not match the report's fingerprint");

  std::vector<Method> methods;
  std::set<std::size_t> counts;
  for (const auto& c : merged.cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    counts.insert(c.count);
  }
  const std::size_t count = po.count.value_or(*counts.begin());
  std::uint64_t seed = 0;
  if (po.seed) {
    seed = *po.seed;
  } else {
    bool found = false;
    for (const auto& c : merged.cells)
      if (c.count == count && !c.estimates.empty() && (!found || c.seed < seed)) seed = c.seed, found = true;
    if (!found) throw std::invalid_argument("no stored estimates at M=" + std::to_string(count));
  }
  const auto test = ds.split.indices(Split::test);
  const std::size_t source = po.source.value_or(test.front());

  const fs::path out = po.output.empty() ? fs::path(po.reports.front()) / "plots" : fs::path(po.output);
  const std::string hash = hex64(json_hash(Json{{"reports", hashes},
                                                {"dataset", merged.dataset_fingerprint},
                                                {"count", count},
                                                {"seed", seed},
                                                {"source", source},
                                                {"z", po.z},
                                                {"hz", po.hz}}));
  const fs::path stamp = out / "effective_config.json";
  const std::vector<std::string> files{"lsd_vs_m.svg", "lsd_vs_m.csv", "spectrum.svg", "spectrum.csv", "plane.svg", "plane.csv"};
  auto all_present = [&] {
    return std::all_of(files.begin(), files.end(), [&](const std::string& f) { return fs::exists(out / f); });
  };
  if (!po.force && all_present() && fs::exists(stamp) && read_json_file(stamp).value("stage_hash", "") == hash) {
    std::cout << "plots up to date: " << out.string() << "\n";
    return kOk;
  }
  fs::create_directories(out);

  // LSD against M, error bars over test sources
  {
    svg::LineChart chart{"Mean LSD on the test sources", "number of observations M", "LSD (dB)", true, {}};
    std::ostringstream csv;
    csv << "method,count,seeds,mean_lsd,std_over_seeds,std_over_sources\n";
    for (Method m : methods) {
      svg::Series s{to_string(m), {}, {}, {}};
      for (const auto& row : merged.summary())
        if (row.method == m) {
          s.x.push_back(static_cast<double>(row.count));
          s.y.push_back(row.mean_lsd);
          s.error.push_back(row.std_over_sources);
          csv << to_string(m) << ',' << row.count << ',' << row.seeds << ',' << num(row.mean_lsd) << ','
              << num(row.std_over_seeds) << ',' << num(row.std_over_sources) << '\n';
        }
      chart.series.push_back(std::move(s));
    }
    write_text(out / "lsd_vs_m.svg", svg::render(chart));
    write_text(out / "lsd_vs_m.csv", csv.str());
  }

  std::vector<const CellResult*> cells;
  for (Method m : methods) {
    const CellResult& c = merged.cell(m, count, seed);
    if (c.estimates.empty())
      throw MissingInput("no stored estimates for " + to_string(m) + " M=" + std::to_string(count) + " seed " +
                         std::to_string(seed) + " (set store_estimates to all)");
    cells.push_back(&c);
  }

  // spectrum at the centre of the target region
  {
    const Vec3 centre = ds.config.target_region.center;
    svg::LineChart chart{"Spectrum at the region centre, source " + std::to_string(source) + ", M=" + std::to_string(count),
                         "frequency (Hz)", "log magnitude (dB)", false, {}};
    std::vector<SpectrumSlice> slices;
    for (const CellResult* c : cells) slices.push_back(spectrum_slice(ds, *c, centre, source));
    chart.series.push_back({"true", slices.front().frequencies, slices.front().truth, {}});
    for (std::size_t k = 0; k < cells.size(); ++k)
      chart.series.push_back({to_string(cells[k]->method), slices[k].frequencies, slices[k].estimate, {}});
    std::ostringstream csv;
    csv << "frequency_hz,true";
    for (const CellResult* c : cells) csv << ',' << to_string(c->method);
    csv << '\n';
    for (std::size_t f = 0; f < ds.num_bins(); ++f) {
      csv << num(slices.front().frequencies[f]) << ',' << num(slices.front().truth[f]);
      for (const auto& s : slices) csv << ',' << num(s.estimate[f]);
      csv << '\n';
    }
    write_text(out / "spectrum.svg", svg::render(chart));
    write_text(out / "spectrum.csv", csv.str());
  }

  // x-y plane heatmaps
  {
    std::vector<PlaneSlice> planes;
    for (const CellResult* c : cells) planes.push_back(plane_slice(ds, *c, source, po.z, po.hz));
    const PlaneSlice& p0 = planes.front();
    std::vector<svg::Heatmap> panels{{"true", p0.xs, p0.ys, p0.truth}};
    for (std::size_t k = 0; k < cells.size(); ++k)
      panels.push_back({to_string(cells[k]->method), planes[k].xs, planes[k].ys, planes[k].estimate});
    std::ostringstream title;
    title << "x-y plane at z=" << po.z << " m, " << po.hz << " Hz, M=" << count;
    std::ostringstream csv;
    csv << "x_m,y_m,true";
    for (const CellResult* c : cells) csv << ',' << to_string(c->method);
    csv << '\n';
    for (std::size_t ix = 0; ix < p0.xs.size(); ++ix)
      for (std::size_t iy = 0; iy < p0.ys.size(); ++iy) {
        const std::size_t i = ix * p0.ys.size() + iy;
        csv << num(p0.xs[ix]) << ',' << num(p0.ys[iy]) << ',' << num(p0.truth[i]);
        for (const auto& p : planes) csv << ',' << num(p.estimate[i]);
        csv << '\n';
      }
    write_text(out / "plane.svg", svg::render_heatmaps(panels, title.str(), "dB"));
    write_text(out / "plane.csv", csv.str());
  }

  Json stamp_json{{"stage_hash", hash},       {"reports", po.reports}, {"report_configs", configs},
                  {"config_hashes", hashes},  {"count", count},        {"seed", seed},
                  {"source", source},         {"z", po.z},             {"hz", po.hz},
                  {"dataset", dataset_dir.string()}};
  write_json_file(stamp, stamp_json);
  if (!all_present()) throw std::runtime_error("plot outputs incomplete in " + out.string());
  std::cout << "wrote " << files.size() << " files to " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int inspect_dataset(const fs::path& dir) {
  const AtfDataset ds = load_dataset(dir);
  const auto [lo, hi] = std::minmax_element(ds.values.begin(), ds.values.end());
  const auto& c = ds.config;
  std::cout << "dataset " << dir.string() << "\n"
            << "  room         " << c.room.dimensions[0] << " x " << c.room.dimensions[1] << " x " << c.room.dimensions[2]
            << " m, RT60 " << c.rt60 << " s, fs " << c.room.sample_rate << " Hz\n"
            << "  targets      " << ds.num_targets() << " (" << c.grid_points_per_axis << " per axis)\n"
            << "  sources      " << ds.num_sources() << " (train " << ds.split.count(Split::train) << ", validation "
            << ds.split.count(Split::validation) << ", test " << ds.split.count(Split::test) << ")\n"
            << "  bins         " << ds.num_bins() << " (" << ds.frequencies.front() << " .. " << ds.frequencies.back()
            << " Hz)\n"
            << "  values       " << *lo << " .. " << *hi << " dB\n"
            << "  fingerprint  " << hex64(ds.fingerprint()) << "\n";
  return kOk;
}

int inspect_report(const fs::path& dir) {
  const EstimateReport r = read_report(dir, false);
  std::cout << "report " << dir.string() << "\n  config hash  " << r.config_hash << "\n  dataset      "
            << r.dataset_fingerprint << "\n  cells        " << r.cells.size() << "\n";
  for (const auto& row : r.summary())
    std::cout << "  " << std::left << std::setw(10) << to_string(row.method) << "M=" << std::setw(5) << row.count
              << std::fixed << std::setprecision(3) << row.mean_lsd << " dB  (seeds " << row.std_over_seeds
              << ", sources " << row.std_over_sources << ")\n"
              << std::defaultfloat;
  return kOk;
}

int inspect_checkpoint(const fs::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  const Json meta = Json::parse(ck.metadata);
  std::size_t trainable = 0;
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    if (ck.params.entry(i).trainable) trainable += static_cast<std::size_t>(ck.params.value(i).size());
  std::cout << "checkpoint " << path.string() << "\n"
            << "  model        " << meta.value("model", "?") << "\n"
            << "  tensors      " << ck.params.size() << "\n"
            << "  trainable    " << trainable << " values\n"
            << "  hash         " << hex64(ck.params.hash()) << "\n";
  if (meta.contains("extra")) {
    const Json& extra = meta.at("extra");
    if (extra.contains("train_seed")) std::cout << "  train seed   " << extra.at("train_seed") << "\n";
    if (extra.contains("dataset_fingerprint")) std::cout << "  dataset      " << extra.at("dataset_fingerprint").get<std::string>() << "\n";
    if (extra.contains("history")) {
      const Json& h = extra.at("history");
      std::cout << "  epochs       " << h.at("epochs").size() << "\n  best epoch   " << h.value("best_epoch", 0) << "\n";
      if (h.contains("best_validation_loss") && h.at("best_validation_loss").is_number())
        std::cout << "  best val LSD " << h.at("best_validation_loss").get<double>() << " dB\n";
    }
  }
  std::cout << "  config       " << meta.at("config").dump() << "\n";
  return kOk;
}

int run_inspect(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInput("missing artifact: " + path.string());
  if (fs::is_directory(path)) {
    if (fs::exists(path / "manifest.json")) return inspect_dataset(path);
    if (fs::exists(path / "report.json")) return inspect_report(path);
    throw MissingInput("no dataset manifest or report.json in " + path.string());
  }
  return inspect_checkpoint(path);
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Log-ATF magnitude estimation from sparse observations"};
  app.require_subcommand(1);

  Common gen, train, eval, sweep;
  auto* gen_cmd = app.add_subcommand("gen-data", "Simulate the dataset");
  add_common(gen_cmd, gen);

  auto* train_cmd = app.add_subcommand("train", "Train learning methods");
  add_common(train_cmd, train);
  std::vector<std::string> train_methods;
  std::size_t log_every = 10;
  train_cmd->add_option("-m,--method", train_methods, "proposed and/or nf (default: those in the config)");
  train_cmd->add_option("--log-every", log_every, "Epochs between progress lines (0: quiet)");

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate one method over the M list and seeds");
  add_common(eval_cmd, eval);
  std::string eval_method;
  eval_cmd->add_option("-m,--method", eval_method, "proposed, nf, krr or zero")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate every configured method with paired measurement sets");
  add_common(sweep_cmd, sweep);

  PlotOptions plot;
  auto* plot_cmd = app.add_subcommand("plot", "LSD-vs-M, spectrum and plane figures with CSV twins");
  plot_cmd->add_option("-r,--report", plot.reports, "Report directory (repeatable)")->required();
  plot_cmd->add_option("-d,--dataset", plot.dataset, "Dataset directory (default: the report's)");
  plot_cmd->add_option("-o,--output", plot.output, "Output directory (default: <first report>/plots)");
  plot_cmd->add_option("--count", plot.count, "M of the spectrum and plane figures (default: smallest)");
  plot_cmd->add_option("--seed", plot.seed, "Evaluation seed of the spectrum and plane figures");
  plot_cmd->add_option("--source", plot.source, "Source index (default: first test source)");
  plot_cmd->add_option("--z", plot.z, "Plane height relative to the region centre (m)");
  plot_cmd->add_option("--hz", plot.hz, "Plane frequency (Hz)");
  plot_cmd->add_flag("-f,--force", plot.force, "Redraw even when up to date");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Summarise a dataset, checkpoint or report");
  inspect_cmd->add_option("path", inspect_path, "Dataset directory, checkpoint file or report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(train, train_methods, log_every);
    if (*eval_cmd) return run_evaluate(eval, {method_from_string(eval_method)}, eval_method);
    if (*sweep_cmd) return run_evaluate(sweep, {}, "sweep");
    if (*plot_cmd) return run_plot(plot);
    if (*inspect_cmd) return run_inspect(inspect_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid config: " << e.what() << "\n";
    return kBadConfig;
  } catch (const MissingInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
