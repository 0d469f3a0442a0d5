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

#include <doctest.h>

#include <filesystem>
#include <set>

#include "atfmag/dataset.hpp"
#include "atfmag/rng.hpp"
#include "support.hpp"

using namespace atfmag;

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a = Rng::derive(7, "split"), b = Rng::derive(7, "split"), c = Rng::derive(7, "other");
  const auto x = a.next_u64();
  CHECK(x == b.next_u64());
  CHECK(x != c.next_u64());
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK((v >= 0.0 && v < 1.0));
  }
}

TEST_CASE("normal draws have unit moments") {
  Rng rng(11);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("sampling without replacement") {
  Rng rng(5);
  const auto all = rng.sample_without_replacement(50, 50);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 50);
  const auto small = Rng(9).sample_without_replacement(100, 10);
  const auto large = Rng(9).sample_without_replacement(100, 40);
  CHECK(std::equal(small.begin(), small.end(), large.begin()));
  CHECK_THROWS(Rng(1).sample_without_replacement(3, 4));
}

TEST_CASE("split covers the full-scale source set") {
  // 820 + 122 + 122 would be 1064 sources; 1024 split 80/10/10 is 820/102/102
  CHECK_THROWS(split_dataset(1024, 820, 122, 122, 0));
  const auto full = DatasetConfig::full_scale();
  const auto s = split_dataset(1024, full.train, full.validation, full.test, 0);
  CHECK(s.count(Split::train) == 820);
  CHECK(s.count(Split::validation) == 102);
  CHECK(s.count(Split::test) == 102);
  std::set<std::size_t> seen;
  for (Split k : {Split::train, Split::validation, Split::test})
    for (auto i : s.indices(k)) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 1024);
}

TEST_CASE("split is deterministic and validates sizes") {
  CHECK(split_dataset(64, 40, 12, 12, 3).of_source == split_dataset(64, 40, 12, 12, 3).of_source);
  CHECK(split_dataset(64, 40, 12, 12, 3).of_source != split_dataset(64, 40, 12, 12, 4).of_source);
  CHECK(split_dataset(10, 10, 0, 0, 1).count(Split::train) == 10);
  CHECK_THROWS(split_dataset(10, 5, 3, 3, 1));
}

TEST_CASE("full and desk configs") {
  const auto full = DatasetConfig::full_scale();
  CHECK(make_target_grid(full.target_region, full.grid_points_per_axis).size() == 1331);
  CHECK(full.num_sources == 1024);
  CHECK(bin_frequencies(full.room).size() == 64);
  const auto desk = DatasetConfig::desk_scale();
  CHECK(desk.num_sources == 128);
  CHECK(desk.train + desk.validation + desk.test == 128);
}

TEST_CASE("sources lie in the room and outside the target region") {
  const auto c = DatasetConfig::desk_scale();
  const auto sources = sample_source_positions(c, 2);
  CHECK(sources.size() == c.num_sources);
  for (const auto& p : sources.coords) {
    CHECK(c.room.contains_strictly(p));
    CHECK_FALSE(c.target_region.contains(p));
  }
}

TEST_CASE("generated dataset shape, finiteness and determinism") {
  const AtfDataset& ds = test::tiny_dataset();
  CHECK(ds.num_targets() == 27);
  CHECK(ds.num_sources() == 8);
  CHECK(ds.num_bins() == 64);
  CHECK(ds.values.size() == 27 * 8 * 64);
  for (float v : ds.values) CHECK(std::isfinite(v));

  DatasetConfig c = ds.config;
  c.workers = 3;
  const AtfDataset again = generate_dataset(c);
  CHECK(again.values == ds.values);
  CHECK(again.fingerprint() == ds.fingerprint());
}

TEST_CASE("dataset values match a direct simulation") {
  const AtfDataset& ds = test::tiny_dataset();
  const std::size_t n = 13, l = 6;
  const auto db = rir_to_log_magnitude(simulate_rir(ds.config.room, ds.sources.coords[l], ds.targets.coords[n]));
  for (std::size_t f = 0; f < ds.num_bins(); ++f) CHECK(ds.at(n, l, f) == static_cast<float>(db[f]));
}

TEST_CASE("dataset save and load round trip") {
  const AtfDataset& ds = test::tiny_dataset();
  const auto dir = std::filesystem::temp_directory_path() / "atfmag_dataset_roundtrip";
  std::filesystem::remove_all(dir);
  save_dataset(ds, dir);
  const AtfDataset back = load_dataset(dir);
  CHECK(back.values == ds.values);
  CHECK(back.split.of_source == ds.split.of_source);
  CHECK(back.frequencies == ds.frequencies);
  CHECK(back.fingerprint() == ds.fingerprint());
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_dataset(dir));
}
