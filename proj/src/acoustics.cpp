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

#include "atfmag/acoustics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace atfmag {

namespace {

constexpr double kPi = std::numbers::pi;

// Hann window argument scale: w(x) = 0.5 (1 + cos(pi x / (H + 1))), |x| < H + 1.
constexpr double kWindowScale = kPi / (kFractionalDelayHalfWidth + 1);

struct TapTable {
  std::array<double, 2 * kFractionalDelayHalfWidth + 1> cos_j{};
  std::array<double, 2 * kFractionalDelayHalfWidth + 1> sin_j{};
  TapTable() {
    for (int j = -kFractionalDelayHalfWidth; j <= kFractionalDelayHalfWidth; ++j) {
      cos_j[j + kFractionalDelayHalfWidth] = std::cos(kWindowScale * j);
      sin_j[j + kFractionalDelayHalfWidth] = std::sin(kWindowScale * j);
    }
  }
};

const TapTable& tap_table() {
  static const TapTable table;
  return table;
}

// Per-axis image coordinate: position = sign * s + 2 m L, reflections |m - p| + |m|.
struct AxisImage {
  double offset;  // 2 m L
  double sign;    // +1 (p = 0) or -1 (p = 1)
  int order;
};

std::vector<AxisImage> axis_images(double length, int max_order) {
  std::vector<AxisImage> out;
  const int m_max = max_order / 2 + 1;
  for (int m = -m_max; m <= m_max; ++m) {
    for (int p = 0; p <= 1; ++p) {
      int order = std::abs(m - p) + std::abs(m);
      if (order > max_order) continue;
      out.push_back({2.0 * m * length, p == 0 ? 1.0 : -1.0, order});
    }
  }
  return out;
}

}  // namespace

double distance(const Vec3& a, const Vec3& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void RoomSpec::validate() const {
  for (double d : dimensions) {
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("room dimensions must be positive");
  }
  if (!(reflection_amplitude >= 0.0 && reflection_amplitude <= 1.0))
    throw std::invalid_argument("reflection amplitude must lie in [0, 1]");
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("speed of sound must be positive");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (rir_length < 1) throw std::invalid_argument("rir length must be at least 1");
}

bool RoomSpec::contains_strictly(const Vec3& p) const {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < dimensions[i])) return false;
  }
  return true;
}

double RoomSpec::surface_area() const {
  const auto& d = dimensions;
  return 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
}

double RoomSpec::diagonal() const {
  return std::hypot(dimensions[0], dimensions[1], dimensions[2]);
}

bool Box::contains(const Vec3& p) const {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(p[i] - center[i]) > 0.5 * extent[i]) return false;
  }
  return true;
}

std::string to_string(PositionRole role) {
  switch (role) {
    case PositionRole::target: return "target";
    case PositionRole::source: return "source";
    case PositionRole::measurement: return "measurement";
  }
  return "target";
}

PositionRole position_role_from_string(const std::string& name) {
  if (name == "target") return PositionRole::target;
  if (name == "source") return PositionRole::source;
  if (name == "measurement") return PositionRole::measurement;
  throw std::invalid_argument("unknown position role: " + name);
}

PositionSet make_target_grid(const Box& region, std::size_t points_per_axis) {
  if (points_per_axis < 1) throw std::invalid_argument("grid needs at least one point per axis");
  PositionSet grid;
  grid.role = PositionRole::target;
  const std::size_t p = points_per_axis;
  grid.coords.reserve(p * p * p);
  auto coord = [&](int axis, std::size_t i) {
    if (p == 1) return region.center[axis];
    double step = region.extent[axis] / static_cast<double>(p - 1);
    // symmetric about the centre so the middle index lands exactly on it
    return region.center[axis] + (static_cast<double>(i) - 0.5 * static_cast<double>(p - 1)) * step;
  };
  for (std::size_t ix = 0; ix < p; ++ix)
    for (std::size_t iy = 0; iy < p; ++iy)
      for (std::size_t iz = 0; iz < p; ++iz)
        grid.coords.push_back({coord(0, ix), coord(1, iy), coord(2, iz)});
  return grid;
}

double sabine_reflection(const Vec3& dimensions, double rt60) {
  if (!(rt60 > 0.0)) throw std::invalid_argument("rt60 must be positive");
  RoomSpec probe;
  probe.dimensions = dimensions;
  for (double d : dimensions)
    if (!(d > 0.0)) throw std::invalid_argument("room dimensions must be positive");
  double alpha = 0.161 * probe.volume() / (probe.surface_area() * rt60);
  if (alpha >= 1.0) throw std::invalid_argument("unachievable reverberation time");
  return std::sqrt(std::clamp(1.0 - alpha, 0.0, 1.0));
}

int default_max_order(const RoomSpec& room) {
  room.validate();
  // An image with k reflections lies at least Lmin (k - 3) / sqrt(3) away.
  const double reach = room.speed_of_sound * static_cast<double>(room.rir_length) / room.sample_rate +
                       room.diagonal();
  const double lmin = *std::min_element(room.dimensions.begin(), room.dimensions.end());
  int order = 0;
  while (lmin * (order - 3) / std::sqrt(3.0) <= reach) ++order;
  return order;
}

ImageSourceSet::ImageSourceSet(const RoomSpec& room, const Vec3& source, int max_order)
    : room_(room), source_(source) {
  room_.validate();
  if (!room_.contains_strictly(source)) throw std::invalid_argument("source must lie strictly inside the room");
  if (max_order < 0) max_order = default_max_order(room_);

  const double reach = room_.speed_of_sound *
                       (static_cast<double>(room_.rir_length) + kFractionalDelayHalfWidth + 1.0) /
                       room_.sample_rate;
  const Vec3 centre{0.5 * room_.dimensions[0], 0.5 * room_.dimensions[1], 0.5 * room_.dimensions[2]};
  const double half_diagonal = 0.5 * room_.diagonal();

  const auto ax = axis_images(room_.dimensions[0], max_order);
  const auto ay = axis_images(room_.dimensions[1], max_order);
  const auto az = axis_images(room_.dimensions[2], max_order);
  const double beta = room_.reflection_amplitude;

  for (const auto& ix : ax) {
    for (const auto& iy : ay) {
      if (ix.order + iy.order > max_order) continue;
      for (const auto& iz : az) {
        const int order = ix.order + iy.order + iz.order;
        if (order > max_order) continue;
        if (order > 0 && beta == 0.0) continue;
        Vec3 pos{ix.sign * source[0] + ix.offset, iy.sign * source[1] + iy.offset,
                 iz.sign * source[2] + iz.offset};
        // every receiver is within half a diagonal of the room centre
        if (distance(pos, centre) - half_diagonal > reach) continue;
        positions_.push_back(pos);
        gains_.push_back(std::pow(beta, order));
      }
    }
  }
}

void ImageSourceSet::render(const Vec3& receiver, std::span<double> out) const {
  if (out.size() != room_.rir_length) throw std::invalid_argument("render buffer has the wrong length");
  const auto& taps = tap_table();
  const double samples_per_metre = room_.sample_rate / room_.speed_of_sound;
  const long length = static_cast<long>(room_.rir_length);
  constexpr int H = kFractionalDelayHalfWidth;

  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const double d = distance(positions_[i], receiver);
    if (d < 1e-9) throw std::invalid_argument("coincident points");
    const double t = d * samples_per_metre;
    const long k0 = static_cast<long>(std::floor(t + 0.5));
    if (k0 - H > length - 1) continue;
    const double amplitude = gains_[i] / (4.0 * kPi * d);
    const double delta = t - static_cast<double>(k0);  // in [-0.5, 0.5]
    const double sin_delta = std::sin(kPi * delta);
    const double wc = std::cos(kWindowScale * delta);
    const double ws = std::sin(kWindowScale * delta);

    const int j_lo = static_cast<int>(std::max<long>(-H, -k0));
    const int j_hi = static_cast<int>(std::min<long>(H, length - 1 - k0));
    for (int j = j_lo; j <= j_hi; ++j) {
      const double x = j - delta;
      double sinc;
      if (x == 0.0) {
        sinc = 1.0;
      } else {
        // sin(pi (j - delta)) = -(-1)^j sin(pi delta)
        const double s = (j & 1) ? sin_delta : -sin_delta;
        sinc = s / (kPi * x);
      }
      // cos(pi (j - delta) / (H + 1)) by angle addition
      const double window = 0.5 * (1.0 + taps.cos_j[j + H] * wc + taps.sin_j[j + H] * ws);
      out[static_cast<std::size_t>(k0 + j)] += amplitude * window * sinc;
    }
  }
}

Rir simulate_rir(const RoomSpec& room, const Vec3& source, const Vec3& receiver, int max_order) {
  room.validate();
  if (!room.contains_strictly(receiver)) throw std::invalid_argument("receiver must lie strictly inside the room");
  if (distance(source, receiver) < 1e-9) throw std::invalid_argument("coincident points");
  ImageSourceSet images(room, source, max_order);
  Rir rir;
  rir.samples.assign(room.rir_length, 0.0);
  images.render(receiver, rir.samples);
  return rir;
}

namespace {

// FFTW planning is not thread-safe; execution on fresh arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealDft {
 public:
  explicit RealDft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealDft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealDft(const RealDft&) = delete;
  RealDft& operator=(const RealDft&) = delete;

  std::size_t size() const { return n_; }

  // Returns |X_k| for k = 1 .. n/2.
  void magnitudes(std::span<const double> x, std::vector<double>& mag) {
    std::copy(x.begin(), x.end(), in_);
    fftw_execute(plan_);
    mag.resize(n_ / 2);
    for (std::size_t k = 1; k <= n_ / 2; ++k) mag[k - 1] = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

RealDft& thread_dft(std::size_t n) {
  thread_local std::unique_ptr<RealDft> dft;
  if (!dft || dft->size() != n) dft = std::make_unique<RealDft>(n);
  return *dft;
}

}  // namespace

std::vector<double> rir_to_log_magnitude(std::span<const double> rir) {
  if (rir.size() < 2) throw std::invalid_argument("rir must have at least two samples");
  bool any = false;
  for (double v : rir) {
    if (!std::isfinite(v)) throw std::invalid_argument("rir contains non-finite samples");
    any = any || v != 0.0;
  }
  if (!any) throw std::invalid_argument("silent channel");
  std::vector<double> mag;
  thread_dft(rir.size()).magnitudes(rir, mag);
  for (double& m : mag) m = 20.0 * std::log10(std::max(m, kMagnitudeFloor));
  return mag;
}

std::vector<double> bin_frequencies(const RoomSpec& room) {
  std::vector<double> f(room.rir_length / 2);
  for (std::size_t k = 1; k <= f.size(); ++k)
    f[k - 1] = static_cast<double>(k) * room.sample_rate / static_cast<double>(room.rir_length);
  return f;
}

}  // namespace atfmag
