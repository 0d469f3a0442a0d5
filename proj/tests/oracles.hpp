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

// Reference implementations written without Eigen, used as independent
// oracles by the unit and acceptance tests.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "atfmag/acoustics.hpp"

namespace atfmag::oracle {

template <typename T>
using Dense = std::vector<std::vector<T>>;

inline double conj_if(double v) { return v; }
inline std::complex<double> conj_if(std::complex<double> v) { return std::conj(v); }

/// Solves A x = b by Gaussian elimination with partial pivoting.
template <typename T>
std::vector<T> gauss_solve(Dense<T> a, std::vector<T> b) {
  const std::size_t n = a.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
    if (std::abs(a[pivot][c]) == 0.0) throw std::runtime_error("singular");
    std::swap(a[c], a[pivot]);
    std::swap(b[c], b[pivot]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const T f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<T> x(n);
  for (std::size_t i = n; i-- > 0;) {
    T acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= a[i][k] * x[k];
    x[i] = acc / a[i][i];
  }
  return x;
}

/// (Phi^H Phi + lambda I)^-1 Phi^H h with explicit loops.
template <typename T>
std::vector<T> ridge(const Dense<T>& phi, const std::vector<T>& h, double lambda) {
  const std::size_t m = phi.size(), j = phi.front().size();
  Dense<T> normal(j, std::vector<T>(j, T(0)));
  std::vector<T> rhs(j, T(0));
  for (std::size_t a = 0; a < j; ++a) {
    for (std::size_t b = 0; b < j; ++b)
      for (std::size_t r = 0; r < m; ++r) normal[a][b] += conj_if(phi[r][a]) * phi[r][b];
    normal[a][a] += T(lambda);
    for (std::size_t r = 0; r < m; ++r) rhs[a] += conj_if(phi[r][a]) * h[r];
  }
  return gauss_solve(normal, rhs);
}

/// Gaussian-kernel ridge regression for one value slice.
inline std::vector<double> krr(const std::vector<Vec3>& x, const std::vector<double>& y, const std::vector<Vec3>& targets,
                               double precision, double lambda, bool half_convention) {
  const double factor = half_convention ? 0.5 * precision : precision;
  auto k = [&](const Vec3& a, const Vec3& b) {
    double r2 = 0.0;
    for (int i = 0; i < 3; ++i) r2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-factor * r2);
  };
  const std::size_t m = x.size();
  Dense<double> g(m, std::vector<double>(m));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) g[a][b] = k(x[a], x[b]) + (a == b ? lambda : 0.0);
  const auto alpha = gauss_solve(g, y);
  std::vector<double> out;
  for (const auto& t : targets) {
    double acc = 0.0;
    for (std::size_t a = 0; a < m; ++a) acc += alpha[a] * k(t, x[a]);
    out.push_back(acc);
  }
  return out;
}

// Independent image-source renderer: plain loops over lattice indices and
// parities, no pruning, direct windowed-sinc evaluation.
inline std::vector<double> brute_force_rir(const RoomSpec& room, const Vec3& s, const Vec3& r, int max_order) {
  std::vector<double> h(room.rir_length, 0.0);
  const int K = max_order;
  for (int nx = -K; nx <= K; ++nx)
    for (int ny = -K; ny <= K; ++ny)
      for (int nz = -K; nz <= K; ++nz)
        for (int px = 0; px <= 1; ++px)
          for (int py = 0; py <= 1; ++py)
            for (int pz = 0; pz <= 1; ++pz) {
              const int order = std::abs(nx - px) + std::abs(nx) + std::abs(ny - py) + std::abs(ny) +
                                std::abs(nz - pz) + std::abs(nz);
              if (order > max_order) continue;
              const double ix = (1 - 2 * px) * s[0] + 2.0 * nx * room.dimensions[0];
              const double iy = (1 - 2 * py) * s[1] + 2.0 * ny * room.dimensions[1];
              const double iz = (1 - 2 * pz) * s[2] + 2.0 * nz * room.dimensions[2];
              const double d = std::sqrt((ix - r[0]) * (ix - r[0]) + (iy - r[1]) * (iy - r[1]) + (iz - r[2]) * (iz - r[2]));
              const double t = d * room.sample_rate / room.speed_of_sound;
              const double a = std::pow(room.reflection_amplitude, order) / (4.0 * std::numbers::pi * d);
              const long centre = std::lround(t);
              for (long k = centre - 40; k <= centre + 40; ++k) {
                if (k < 0 || k >= static_cast<long>(h.size())) continue;
                const double x = static_cast<double>(k) - t;
                const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
                const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * x / 41.0));
                h[static_cast<std::size_t>(k)] += a * w * sinc;
              }
            }
  return h;
}

}  // namespace atfmag::oracle
