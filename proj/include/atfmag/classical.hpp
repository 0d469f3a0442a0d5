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

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "atfmag/acoustics.hpp"

namespace atfmag {

/// How the precision enters the exponent.
///   half: exp(-(beta / 2) r^2)
///   full: exp(-beta r^2)
enum class KernelConvention { half, full };

std::string to_string(KernelConvention c);
KernelConvention kernel_convention_from_string(const std::string& s);

struct KernelConfig {
  double precision = 1e-2;       // 1/m^2
  double regularization = 1e-3;
  KernelConvention convention = KernelConvention::half;

  void validate() const;
};

void to_json(nlohmann::json& j, const KernelConfig& c);
void from_json(const nlohmann::json& j, KernelConfig& c);

template <typename Scalar>
struct RidgeProblem {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Matrix design;  // M x J
  Vector observations;  // M
  double regularization = 0.0;
};

/// gamma = (Phi^H Phi + lambda I)^-1 Phi^H h by Cholesky. Throws
/// std::runtime_error("rank deficient") when the system is singular.
Eigen::VectorXd ridge_solve(const RidgeProblem<double>& problem);
Eigen::VectorXcd ridge_solve(const RidgeProblem<std::complex<double>>& problem);

double gaussian_kernel(const Vec3& x, const Vec3& y, double precision,
                       KernelConvention convention = KernelConvention::half);

Eigen::MatrixXd gram_matrix(std::span<const Vec3> a, std::span<const Vec3> b, const KernelConfig& config);

/// Kernel ridge regression for one measurement set. The factorisation of
/// (K + lambda I) is computed once and reused for every value column.
class KrrEstimator {
 public:
  KrrEstimator(std::span<const Vec3> measurement_positions, const KernelConfig& config);

  std::size_t measurement_count() const { return positions_.size(); }

  /// values: M x S (one column per (source, frequency) slice).
  /// Returns targets x S.
  Eigen::MatrixXd predict(std::span<const Vec3> targets, const Eigen::MatrixXd& values) const;

 private:
  std::vector<Vec3> positions_;
  KernelConfig config_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
};

/// Row-major convenience wrapper: values[m * S + s] -> estimates[n * S + s].
std::vector<double> krr_fit_predict(std::span<const Vec3> measurement_positions, std::span<const double> values,
                                    std::span<const Vec3> targets, const KernelConfig& config);

}  // namespace atfmag
