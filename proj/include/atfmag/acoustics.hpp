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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace atfmag {

using Vec3 = std::array<double, 3>;

double distance(const Vec3& a, const Vec3& b);

/// Shoebox room with one broadband reflection amplitude shared by all walls.
/// Coordinates are metres with the origin at a room corner.
struct RoomSpec {
  Vec3 dimensions{4.0, 6.0, 3.0};
  double reflection_amplitude = 0.0;
  double speed_of_sound = 343.0;
  double sample_rate = 2000.0;
  std::size_t rir_length = 128;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
  bool contains_strictly(const Vec3& p) const;
  double volume() const { return dimensions[0] * dimensions[1] * dimensions[2]; }
  double surface_area() const;
  double diagonal() const;
};

/// Axis-aligned cuboid; used for the target region.
struct Box {
  Vec3 center{};
  Vec3 extent{};  // full edge lengths

  bool contains(const Vec3& p) const;  // closed box
};

enum class PositionRole { target, source, measurement };

std::string to_string(PositionRole role);
PositionRole position_role_from_string(const std::string& name);

struct PositionSet {
  std::vector<Vec3> coords;
  PositionRole role = PositionRole::target;

  std::size_t size() const { return coords.size(); }
};

/// Regular grid over a box, `points_per_axis` samples per axis including the
/// faces. Index order is x-major: n = (ix * P + iy) * P + iz.
PositionSet make_target_grid(const Box& region, std::size_t points_per_axis);

struct Rir {
  std::vector<double> samples;
  std::size_t source_index = 0;
  std::size_t receiver_index = 0;
};

/// Uniform wall reflection amplitude sqrt(1 - alpha) with alpha taken from
/// Sabine's formula alpha = 0.161 V / (S T60).
double sabine_reflection(const Vec3& dimensions, double rt60);

/// Smallest reflection order whose every image lies beyond
/// c * rir_length / fs + room diagonal, for any source/receiver in the room.
int default_max_order(const RoomSpec& room);

/// Half width of the windowed-sinc fractional delay kernel (81 taps total).
inline constexpr int kFractionalDelayHalfWidth = 40;

/// Image sources of one physical source, pruned to those that can reach any
/// receiver inside the room within the RIR window.
class ImageSourceSet {
 public:
  ImageSourceSet(const RoomSpec& room, const Vec3& source, int max_order);

  /// Adds every image's arrival into `out` (length rir_length, zeroed by caller).
  void render(const Vec3& receiver, std::span<double> out) const;

  std::size_t size() const { return positions_.size(); }
  const RoomSpec& room() const { return room_; }
  const Vec3& source() const { return source_; }

 private:
  RoomSpec room_;
  Vec3 source_;
  std::vector<Vec3> positions_;
  std::vector<double> gains_;  // reflection_amplitude ^ order
};

/// Image-source RIR between `source` and `receiver`. A negative max_order
/// selects default_max_order(room).
Rir simulate_rir(const RoomSpec& room, const Vec3& source, const Vec3& receiver,
                 int max_order = -1);

/// One-sided bins 1..rir_length/2 (DC excluded) of the RIR's DFT, in dB.
/// Bin magnitudes are floored at kMagnitudeFloor so the result stays finite.
inline constexpr double kMagnitudeFloor = 1e-20;
std::vector<double> rir_to_log_magnitude(std::span<const double> rir);
inline std::vector<double> rir_to_log_magnitude(const Rir& rir) {
  return rir_to_log_magnitude(rir.samples);
}

/// Centre frequencies (Hz) of the bins returned by rir_to_log_magnitude.
std::vector<double> bin_frequencies(const RoomSpec& room);

}  // namespace atfmag
