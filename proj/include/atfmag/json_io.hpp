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

#include <filesystem>
#include <string>

#include <json.hpp>

#include "atfmag/acoustics.hpp"
#include "atfmag/dataset.hpp"

namespace atfmag {

using Json = nlohmann::json;

void to_json(Json& j, const RoomSpec& room);
void from_json(const Json& j, RoomSpec& room);
void to_json(Json& j, const Box& box);
void from_json(const Json& j, Box& box);
void to_json(Json& j, const DatasetConfig& config);
void from_json(const Json& j, DatasetConfig& config);

/// Parses a JSON file; syntax errors are reported as "path:line:column: message".
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// Stable hash of a JSON document (keys are sorted by nlohmann::json).
std::uint64_t json_hash(const Json& j);
std::string hex64(std::uint64_t value);

/// Reads `key` from `j` if present, leaving `out` untouched otherwise.
template <typename T>
void read_optional(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace atfmag
