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

#include <cmath>
#include <complex>
#include <numbers>

#include "atfmag/acoustics.hpp"
#include "atfmag/rng.hpp"
#include "oracles.hpp"

using namespace atfmag;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> X(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t)
      X[k] += x[t] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * t % n) / static_cast<double>(n));
  return X;
}

RoomSpec reverberant_room() {
  RoomSpec room;
  room.reflection_amplitude = sabine_reflection(room.dimensions, 0.2);
  return room;
}

}  // namespace

TEST_CASE("sabine reflection for the desk room") {
  const double V = 4.0 * 6.0 * 3.0, S = 2.0 * (4.0 * 6.0 + 4.0 * 3.0 + 6.0 * 3.0);
  const double alpha = 0.161 * V / (S * 0.2);
  CHECK(alpha == doctest::Approx(0.5367).epsilon(1e-4));
  CHECK(sabine_reflection({4, 6, 3}, 0.2) == doctest::Approx(std::sqrt(1.0 - alpha)).epsilon(1e-15));
  CHECK(sabine_reflection({4, 6, 3}, 0.2) == doctest::Approx(0.6807).epsilon(1e-4));
}

TEST_CASE("sabine reflection limits and errors") {
  CHECK(sabine_reflection({4, 6, 3}, 1e9) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_WITH(sabine_reflection({1, 1, 1}, 0.01), "unachievable reverberation time");
  CHECK_THROWS(sabine_reflection({4, 6, 3}, 0.0));
}

TEST_CASE("room spec validation") {
  RoomSpec room;
  room.dimensions = {4, 0, 3};
  CHECK_THROWS(room.validate());
  room = RoomSpec{};
  room.reflection_amplitude = 1.5;
  CHECK_THROWS(room.validate());
  room = RoomSpec{};
  room.rir_length = 0;
  CHECK_THROWS(room.validate());
}

TEST_CASE("free-field impulse amplitude and delay") {
  RoomSpec room;
  room.speed_of_sound = 400.0;  // 1 m is exactly 5 samples at 2 kHz
  const Rir near = simulate_rir(room, {1.0, 1.0, 1.0}, {2.0, 1.0, 1.0});
  const Rir far = simulate_rir(room, {1.0, 1.0, 1.0}, {3.0, 1.0, 1.0});
  CHECK(std::abs(near.samples[5] - 1.0 / (4.0 * kPi)) <= 1e-6 / (4.0 * kPi));
  for (std::size_t k = 0; k < near.samples.size(); ++k)
    if (k != 5) CHECK(near.samples[k] == 0.0);
  CHECK(far.samples[10] == doctest::Approx(0.5 * near.samples[5]).epsilon(1e-15));
}

TEST_CASE("zero reflection order equals free field") {
  RoomSpec room = reverberant_room();
  RoomSpec free = room;
  free.reflection_amplitude = 0.0;
  const Vec3 s{1.2, 2.3, 1.1}, r{2.5, 3.1, 1.6};
  CHECK(simulate_rir(room, s, r, 0).samples == simulate_rir(free, s, r).samples);
}

TEST_CASE("reciprocity of the mirror construction") {
  const RoomSpec room = reverberant_room();
  const Vec3 a{0.7, 4.9, 2.2}, b{2.4, 2.6, 1.3};
  const auto ab = simulate_rir(room, a, b).samples;
  const auto ba = simulate_rir(room, b, a).samples;
  double worst = 0.0;
  for (std::size_t k = 0; k < ab.size(); ++k) worst = std::max(worst, std::abs(ab[k] - ba[k]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("agreement with brute-force image enumeration") {
  const RoomSpec room = reverberant_room();
  const Vec3 s{1.3, 4.4, 1.9}, r{2.2, 2.7, 1.4};
  const int order = 8;
  const auto fast = simulate_rir(room, s, r, order).samples;
  const auto slow = oracle::brute_force_rir(room, s, r, order);
  double worst = 0.0;
  for (std::size_t k = 0; k < fast.size(); ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("default order saturates the window") {
  const RoomSpec room = reverberant_room();
  const int order = default_max_order(room);
  const Vec3 s{3.1, 0.8, 2.5}, r{1.6, 3.4, 1.0};
  CHECK(simulate_rir(room, s, r, order).samples == simulate_rir(room, s, r, order + 3).samples);
  CHECK(simulate_rir(room, s, r).samples == simulate_rir(room, s, r, order).samples);
}

TEST_CASE("simulate_rir errors") {
  const RoomSpec room;
  CHECK_THROWS_WITH(simulate_rir(room, {1, 1, 1}, {1, 1, 1}), "coincident points");
  CHECK_THROWS(simulate_rir(room, {5, 1, 1}, {1, 1, 1}));
}

TEST_CASE("log magnitude of simple signals") {
  std::vector<double> delta(128, 0.0);
  delta[0] = 1.0;
  const auto flat = rir_to_log_magnitude(delta);
  REQUIRE(flat.size() == 64);
  for (double v : flat) CHECK(std::abs(v) <= 1e-12);

  Rng rng(4);
  std::vector<double> x(128), y(128);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform(-1.0, 1.0);
    y[i] = 10.0 * x[i];
  }
  const auto ax = rir_to_log_magnitude(x), ay = rir_to_log_magnitude(y);
  for (std::size_t f = 0; f < ax.size(); ++f) CHECK(ay[f] - ax[f] == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("bin-centred cosine against a direct DFT sum") {
  const std::size_t k = 16;
  std::vector<double> x(128);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::cos(2.0 * kPi * static_cast<double>(k * n) / 128.0);
  const auto db = rir_to_log_magnitude(x);
  const auto X = naive_dft(x);
  const auto peak = static_cast<std::size_t>(std::max_element(db.begin(), db.end()) - db.begin()) + 1;
  CHECK(peak == k);
  const double magnitude = std::pow(10.0, db[k - 1] / 20.0);
  CHECK(std::abs(magnitude - std::abs(X[k])) <= 1e-9 * std::abs(X[k]));
  CHECK(magnitude == doctest::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("silent channel") {
  CHECK_THROWS_WITH(rir_to_log_magnitude(std::vector<double>(128, 0.0)), "silent channel");
}

TEST_CASE("bin frequencies") {
  const auto f = bin_frequencies(RoomSpec{});
  REQUIRE(f.size() == 64);
  CHECK(f.front() == 15.625);
  CHECK(f[15] == 250.0);
  CHECK(f.back() == 1000.0);
}

TEST_CASE("target grid") {
  const Box region{{2.0, 3.0, 1.5}, {1.0, 1.0, 1.0}};
  const auto grid = make_target_grid(region, 11);
  REQUIRE(grid.size() == 1331);
  const Vec3 centre = grid.coords[(5 * 11 + 5) * 11 + 5];
  CHECK(centre == region.center);
  for (const auto& p : grid.coords) CHECK(region.contains(p));
  CHECK(grid.coords[1][2] - grid.coords[0][2] == doctest::Approx(0.1).epsilon(1e-12));
}
