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

#include "atfmag/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "atfmag/binary_io.hpp"
#include "atfmag/json_io.hpp"
#include "atfmag/parallel.hpp"
#include "atfmag/rng.hpp"

namespace atfmag {

namespace binary {

void write_f32_file(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_array(out, values);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<float> read_f32_file(const std::filesystem::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(float))
    throw std::runtime_error(path.string() + ": expected " + std::to_string(expected_count) +
                             " float32 values, found " + std::to_string(bytes) + " bytes");
  in.seekg(0);
  std::vector<float> values(expected_count);
  read_array(in, std::span<float>(values));
  return values;
}

}  // namespace binary

namespace {
constexpr const char* kTensorFile = "log_magnitude.f32";
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

std::vector<std::size_t> SplitAssignment::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < of_source.size(); ++i)
    if (of_source[i] == split) out.push_back(i);
  return out;
}

std::size_t SplitAssignment::count(Split split) const {
  return static_cast<std::size_t>(std::count(of_source.begin(), of_source.end(), split));
}

SplitAssignment split_dataset(std::size_t num_sources, std::size_t train, std::size_t validation,
                              std::size_t test, std::uint64_t seed) {
  if (train + validation + test != num_sources)
    throw std::invalid_argument("split sizes " + std::to_string(train) + "+" + std::to_string(validation) +
                                "+" + std::to_string(test) + " do not sum to " + std::to_string(num_sources));
  std::vector<std::size_t> order(num_sources);
  for (std::size_t i = 0; i < num_sources; ++i) order[i] = i;
  Rng rng = Rng::derive(seed, "split");
  rng.shuffle(order);
  SplitAssignment out;
  out.seed = seed;
  out.of_source.assign(num_sources, Split::train);
  for (std::size_t k = 0; k < num_sources; ++k) {
    Split s = k < train ? Split::train : (k < train + validation ? Split::validation : Split::test);
    out.of_source[order[k]] = s;
  }
  return out;
}

DatasetConfig DatasetConfig::full_scale() { return DatasetConfig{}; }

DatasetConfig DatasetConfig::desk_scale() {
  DatasetConfig c;
  c.num_sources = 128;
  c.train = 96;
  c.validation = 16;
  c.test = 16;
  return c;
}

std::uint64_t AtfDataset::fingerprint() const {
  std::uint64_t h = hash_bytes(values.data(), values.size() * sizeof(float));
  h = hash_bytes(targets.coords.data(), targets.coords.size() * sizeof(Vec3), h);
  h = hash_bytes(sources.coords.data(), sources.coords.size() * sizeof(Vec3), h);
  h = hash_bytes(frequencies.data(), frequencies.size() * sizeof(double), h);
  return hash_bytes(split.of_source.data(), split.of_source.size(), h);
}

PositionSet sample_source_positions(const DatasetConfig& config, std::uint64_t seed) {
  const auto& dims = config.room.dimensions;
  Box excluded = config.target_region;
  for (double& e : excluded.extent) e += 2.0 * config.source_region_margin;
  Rng rng = Rng::derive(seed, "sources");
  PositionSet out;
  out.role = PositionRole::source;
  std::size_t attempts = 0;
  while (out.coords.size() < config.num_sources) {
    if (++attempts > 1000 * (config.num_sources + 1))
      throw std::invalid_argument("cannot place sources: room too small for the excluded region");
    Vec3 p;
    for (int i = 0; i < 3; ++i)
      p[i] = rng.uniform(config.source_wall_margin, dims[i] - config.source_wall_margin);
    if (!config.room.contains_strictly(p) || excluded.contains(p)) continue;
    out.coords.push_back(p);
  }
  return out;
}

AtfDataset generate_dataset(const DatasetConfig& config) {
  PositionSet targets = make_target_grid(config.target_region, config.grid_points_per_axis);
  PositionSet sources = sample_source_positions(config, config.seed);
  return generate_dataset(config, targets, sources);
}

AtfDataset generate_dataset(const DatasetConfig& config, const PositionSet& targets,
                            const PositionSet& sources) {
  AtfDataset ds;
  ds.config = config;
  ds.config.room.reflection_amplitude = sabine_reflection(config.room.dimensions, config.rt60);
  ds.config.room.validate();
  ds.config.num_sources = sources.size();
  ds.targets = targets;
  ds.sources = sources;
  ds.frequencies = bin_frequencies(ds.config.room);
  ds.split = split_dataset(sources.size(), config.train, config.validation, config.test, config.seed);

  const std::size_t N = targets.size(), L = sources.size(), F = ds.frequencies.size();
  ds.values.assign(N * L * F, 0.0f);
  const RoomSpec& room = ds.config.room;

  for (std::size_t n = 0; n < N; ++n)
    if (!room.contains_strictly(targets.coords[n]))
      throw std::invalid_argument("target " + std::to_string(n) + " lies outside the room");

  parallel_for(L, config.workers, [&](std::size_t l) {
    std::vector<double> rir(room.rir_length);
    std::size_t n = 0;
    try {
      ImageSourceSet images(room, sources.coords[l], config.max_order);
      for (n = 0; n < N; ++n) {
        if (distance(sources.coords[l], targets.coords[n]) < 1e-9) throw std::invalid_argument("coincident points");
        std::fill(rir.begin(), rir.end(), 0.0);
        images.render(targets.coords[n], rir);
        auto mag = rir_to_log_magnitude(rir);
        float* dst = ds.values.data() + ds.offset(n, l);
        for (std::size_t f = 0; f < F; ++f) dst[f] = static_cast<float>(mag[f]);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("source " + std::to_string(l) + ", target " + std::to_string(n) + ": " + e.what());
    }
  });
  return ds;
}

void save_dataset(const AtfDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["config"] = ds.config;
  manifest["targets"] = ds.targets.coords;
  manifest["sources"] = ds.sources.coords;
  manifest["frequencies_hz"] = ds.frequencies;
  std::vector<int> split(ds.split.of_source.size());
  for (std::size_t i = 0; i < split.size(); ++i) split[i] = static_cast<int>(ds.split.of_source[i]);
  manifest["split"] = {{"seed", ds.split.seed},
                       {"encoding", "0=train,1=validation,2=test"},
                       {"of_source", split}};
  manifest["tensors"] = Json::array({Json{{"name", "log_magnitude"},
                                          {"file", kTensorFile},
                                          {"dtype", "float32-le"},
                                          {"unit", "dB"},
                                          {"layout", "row-major (n, l, f)"},
                                          {"shape", {ds.num_targets(), ds.num_sources(), ds.num_bins()}}}});
  manifest["fingerprint"] = hex64(ds.fingerprint());
  binary::write_f32_file(dir / kTensorFile, ds.values);
  write_json_file(dir / "manifest.json", manifest);
}

AtfDataset load_dataset(const std::filesystem::path& dir) {
  auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw std::runtime_error("missing dataset manifest: " + manifest_path.string());
  Json m = read_json_file(manifest_path);
  try {
    if (m.at("format_version").get<int>() != kDatasetFormatVersion)
      throw std::runtime_error("unsupported dataset format version");
    AtfDataset ds;
    ds.config = m.at("config").get<DatasetConfig>();
    ds.targets.role = PositionRole::target;
    ds.targets.coords = m.at("targets").get<std::vector<Vec3>>();
    ds.sources.role = PositionRole::source;
    ds.sources.coords = m.at("sources").get<std::vector<Vec3>>();
    ds.frequencies = m.at("frequencies_hz").get<std::vector<double>>();
    ds.split.seed = m.at("split").at("seed").get<std::uint64_t>();
    for (int s : m.at("split").at("of_source").get<std::vector<int>>()) {
      if (s < 0 || s > 2) throw std::runtime_error("invalid split code");
      ds.split.of_source.push_back(static_cast<Split>(s));
    }
    if (ds.split.of_source.size() != ds.sources.size()) throw std::runtime_error("split size does not match sources");
    const auto& tensor = m.at("tensors").at(0);
    auto shape = tensor.at("shape").get<std::vector<std::size_t>>();
    if (shape != std::vector<std::size_t>{ds.num_targets(), ds.num_sources(), ds.num_bins()})
      throw std::runtime_error("tensor shape does not match coordinate tables");
    ds.values = binary::read_f32_file(dir / tensor.at("file").get<std::string>(),
                                      ds.num_targets() * ds.num_sources() * ds.num_bins());
    return ds;
  } catch (const Json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace atfmag
