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

#include <string>
#include <vector>

namespace atfmag::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> error;  // optional symmetric error bars
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
};

std::string render(const LineChart& chart);

struct Heatmap {
  std::string title;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> values;  // values[ix * ys.size() + iy]
};

/// Panels side by side on one shared colour scale.
std::string render_heatmaps(const std::vector<Heatmap>& panels, const std::string& title, const std::string& unit);

}  // namespace atfmag::svg
