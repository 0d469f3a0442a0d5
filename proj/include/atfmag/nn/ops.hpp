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

#include <span>
#include <vector>

#include "atfmag/nn/autodiff.hpp"

namespace atfmag::nn {

inline constexpr double kLayerNormEpsilon = 1e-5;
inline constexpr double kLsdEpsilon = 1e-12;

/// x[B,in] W[out,in]^T + b[out] -> [B,out]
Var linear(const Var& input, const Var& weight, const Var& bias);

/// Per-item affine map with generated weights: y[b] = W[b] x[b] + c[b].
/// weight is [B,out,in] (or [B,out*in] with out taken from bias), bias is [B,out].
Var hyper_linear(const Var& input, const Var& weight, const Var& bias);
/// Same map with weight and bias packed in one row: generated[B, out*in + out]
/// holds W[b] row-major followed by c[b].
Var hyper_linear_packed(const Var& input, const Var& generated, Index out);

/// Row-wise normalisation over the last dimension, then gain/shift ([D] each).
Var layer_norm(const Var& input, const Var& gain, const Var& shift, double epsilon = kLayerNormEpsilon);

/// x tanh(softplus(x)), elementwise.
Var mish(const Var& input);
double mish(double x);

Var relu(const Var& input);

/// [cos(2 pi v F^T), sin(2 pi v F^T)] for v[B,D], F[K,D] -> [B,2K].
/// F is a fixed matrix; gradients flow to v only.
Var fourier_features(const Var& input, const Tensor& frequency_matrix);

/// Mean over (row) pairs of the root-mean-square error over the last axis:
/// (1/P) sum_p sqrt((1/F) sum_f (est - truth)^2). est may be [N,L,F] or [P,F].
/// The backward pass divides by sqrt(... + kLsdEpsilon), so exact-match pairs
/// get a zero gradient rather than 0/0.
Var lsd_loss(const Var& estimate, const Tensor& truth);

/// Mean of the rows of `input` that share a group id: out[g] = mean{ input[r] : group[r] == g }.
/// Every group in [0, num_groups) must be non-empty.
Var group_mean(const Var& input, std::span<const Index> group, Index num_groups);

/// out[r] = input[index[r]]; gradients scatter-add back.
Var gather_rows(const Var& input, std::span<const Index> index);

/// Concatenates along the last axis: [B,a] ++ [B,b] -> [B,a+b].
Var concat_columns(const Var& left, const Var& right);

/// Column slice [begin, begin + count) of a [B,C] value.
Var slice_columns(const Var& input, Index begin, Index count);

Var reshape(const Var& input, Shape shape);

/// Sum of all entries -> scalar; scale multiplies every entry.
Var sum(const Var& input);
Var scale(const Var& input, double factor);
Var add(const Var& a, const Var& b);

}  // namespace atfmag::nn
