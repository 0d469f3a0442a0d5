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

#include "atfmag/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "atfmag/rng.hpp"

namespace atfmag {

void to_json(Json& j, const RoomSpec& room) {
  j = Json{{"dimensions", room.dimensions},
           {"reflection_amplitude", room.reflection_amplitude},
           {"speed_of_sound", room.speed_of_sound},
           {"sample_rate", room.sample_rate},
           {"rir_length", room.rir_length}};
}

void from_json(const Json& j, RoomSpec& room) {
  read_optional(j, "dimensions", room.dimensions);
  read_optional(j, "reflection_amplitude", room.reflection_amplitude);
  read_optional(j, "speed_of_sound", room.speed_of_sound);
  read_optional(j, "sample_rate", room.sample_rate);
  read_optional(j, "rir_length", room.rir_length);
}

void to_json(Json& j, const Box& box) { j = Json{{"center", box.center}, {"extent", box.extent}}; }

void from_json(const Json& j, Box& box) {
  read_optional(j, "center", box.center);
  read_optional(j, "extent", box.extent);
}

void to_json(Json& j, const DatasetConfig& c) {
  j = Json{{"room", c.room},
           {"rt60", c.rt60},
           {"target_region", c.target_region},
           {"grid_points_per_axis", c.grid_points_per_axis},
           {"num_sources", c.num_sources},
           {"source_wall_margin", c.source_wall_margin},
           {"source_region_margin", c.source_region_margin},
           {"max_order", c.max_order},
           {"split", {{"train", c.train}, {"validation", c.validation}, {"test", c.test}}},
           {"seed", c.seed}};
}

void from_json(const Json& j, DatasetConfig& c) {
  read_optional(j, "room", c.room);
  read_optional(j, "rt60", c.rt60);
  read_optional(j, "target_region", c.target_region);
  read_optional(j, "grid_points_per_axis", c.grid_points_per_axis);
  read_optional(j, "num_sources", c.num_sources);
  read_optional(j, "source_wall_margin", c.source_wall_margin);
  read_optional(j, "source_region_margin", c.source_region_margin);
  read_optional(j, "max_order", c.max_order);
  if (auto it = j.find("split"); it != j.end()) {
    read_optional(*it, "train", c.train);
    read_optional(*it, "validation", c.validation);
    read_optional(*it, "test", c.test);
  }
  read_optional(j, "seed", c.seed);
  read_optional(j, "workers", c.workers);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream msg;
    msg << path.string() << ":" << line << ":" << column << ": " << e.what();
    throw std::runtime_error(msg.str());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::uint64_t json_hash(const Json& j) {
  std::string text = j.dump();
  return hash_bytes(text.data(), text.size());
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace atfmag
