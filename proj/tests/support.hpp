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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "atfmag/dataset.hpp"
#include "atfmag/nn/autodiff.hpp"
#include "atfmag/nn/ops.hpp"
#include "atfmag/nn/parameters.hpp"
#include "atfmag/rng.hpp"

namespace atfmag::test {

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-8 ? std::abs(a - b) : std::abs(a - b) / scale;
}

using LossFn = std::function<nn::Var(const std::vector<nn::Var>&)>;

/// Largest relative error between reverse-mode gradients and central
/// differences, over every entry of every input.
inline double gradient_check(std::vector<nn::Tensor> inputs, const LossFn& loss, double step = 1e-5) {
  std::vector<nn::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(nn::Var::parameter(t));
  nn::backward(loss(leaves));
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const nn::Tensor analytic = leaves[i].grad();
    for (nn::Index k = 0; k < inputs[i].size(); ++k) {
      auto eval = [&](double delta) {
        std::vector<nn::Var> probe;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          nn::Tensor t = inputs[j];
          if (j == i) t[k] += delta;
          probe.push_back(nn::Var::constant(std::move(t)));
        }
        return loss(probe).value()[0];
      };
      const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
      worst = std::max(worst, relative_error(analytic[k], numeric));
    }
  }
  return worst;
}

/// Same check over the trainable entries of a parameter set.
inline double parameter_gradient_check(nn::ModelParameters params, const LossFn& loss, double step = 1e-5) {
  auto leaves = params.bind(true);
  nn::backward(loss(leaves));
  const auto grads = params.gradients(leaves);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.entry(i).trainable) continue;
    for (nn::Index k = 0; k < params.value(i).size(); ++k) {
      const double saved = params.value(i)[k];
      params.value(i)[k] = saved + step;
      const double up = loss(params.bind(false)).value()[0];
      params.value(i)[k] = saved - step;
      const double down = loss(params.bind(false)).value()[0];
      params.value(i)[k] = saved;
      worst = std::max(worst, relative_error(grads[i][k], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

/// Weighted sum of all entries with fixed random weights, so every output
/// entry gets a distinct upstream gradient.
inline nn::Var probe_loss(const nn::Var& out, std::uint64_t seed = 99) {
  Rng rng(seed);
  nn::Tensor w(nn::Shape{out.value().size()});
  for (auto& v : w.values()) v = rng.uniform(-1.0, 1.0);
  nn::Var flat = nn::reshape(out, {1, out.value().size()});
  // sum_k w_k out_k as a 1x1 linear map
  return nn::sum(nn::linear(flat, nn::Var::constant(w.reshaped({1, w.size()})), nn::Var::constant(nn::Tensor({1}))));
}

/// Small simulated dataset: 3x3x3 targets, 8 sources split 5/2/1.
inline const AtfDataset& tiny_dataset() {
  static const AtfDataset ds = [] {
    DatasetConfig c = DatasetConfig::desk_scale();
    c.grid_points_per_axis = 3;
    c.num_sources = 8;
    c.train = 5;
    c.validation = 2;
    c.test = 1;
    c.seed = 3;
    c.workers = 1;
    return generate_dataset(c);
  }();
  return ds;
}

}  // namespace atfmag::test
