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

#include "atfmag/classical.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "atfmag/json_io.hpp"

namespace atfmag {

std::string to_string(KernelConvention c) { return c == KernelConvention::half ? "half" : "full"; }

KernelConvention kernel_convention_from_string(const std::string& s) {
  if (s == "half") return KernelConvention::half;
  if (s == "full") return KernelConvention::full;
  throw std::invalid_argument("unknown kernel convention '" + s + "' (expected half or full)");
}

void KernelConfig::validate() const {
  if (!(precision > 0.0) || !std::isfinite(precision)) throw std::invalid_argument("kernel precision must be > 0");
  if (!(regularization >= 0.0) || !std::isfinite(regularization))
    throw std::invalid_argument("kernel regularization must be >= 0");
}

void to_json(nlohmann::json& j, const KernelConfig& c) {
  j = nlohmann::json{{"precision", c.precision}, {"regularization", c.regularization}, {"convention", to_string(c.convention)}};
}

void from_json(const nlohmann::json& j, KernelConfig& c) {
  read_optional(j, "precision", c.precision);
  read_optional(j, "regularization", c.regularization);
  if (auto it = j.find("convention"); it != j.end()) c.convention = kernel_convention_from_string(it->get<std::string>());
}

namespace {

// Cholesky of a Hermitian matrix; near-singular pivots count as failure.
template <typename Matrix>
Eigen::LLT<Matrix> factorize(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw std::runtime_error("rank deficient");
  const double tolerance = std::numeric_limits<double>::epsilon() * static_cast<double>(a.rows());
  if (!(llt.rcond() > tolerance)) throw std::runtime_error("rank deficient");
  return llt;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> solve(const RidgeProblem<Scalar>& p) {
  using Matrix = typename RidgeProblem<Scalar>::Matrix;
  const auto& phi = p.design;
  if (phi.rows() < 1 || phi.cols() < 1) throw std::invalid_argument("ridge_solve: empty design matrix");
  if (p.observations.size() != phi.rows()) throw std::invalid_argument("ridge_solve: observation length mismatch");
  if (!(p.regularization >= 0.0)) throw std::invalid_argument("ridge_solve: regularization must be >= 0");
  if (!phi.allFinite() || !p.observations.allFinite()) throw std::invalid_argument("ridge_solve: non-finite input");
  Matrix normal = phi.adjoint() * phi;
  normal.diagonal().array() += Scalar(p.regularization);
  return factorize(normal).solve(phi.adjoint() * p.observations);
}

}  // namespace

Eigen::VectorXd ridge_solve(const RidgeProblem<double>& problem) { return solve(problem); }
Eigen::VectorXcd ridge_solve(const RidgeProblem<std::complex<double>>& problem) { return solve(problem); }

double gaussian_kernel(const Vec3& x, const Vec3& y, double precision, KernelConvention convention) {
  const double dx = x[0] - y[0], dy = x[1] - y[1], dz = x[2] - y[2];
  const double r2 = dx * dx + dy * dy + dz * dz;
  const double factor = convention == KernelConvention::half ? 0.5 * precision : precision;
  return std::exp(-factor * r2);
}

Eigen::MatrixXd gram_matrix(std::span<const Vec3> a, std::span<const Vec3> b, const KernelConfig& config) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          gaussian_kernel(a[i], b[j], config.precision, config.convention);
  return k;
}

KrrEstimator::KrrEstimator(std::span<const Vec3> measurement_positions, const KernelConfig& config)
    : positions_(measurement_positions.begin(), measurement_positions.end()), config_(config) {
  config_.validate();
  if (positions_.empty()) throw std::invalid_argument("no observations");
  Eigen::MatrixXd k = gram_matrix(positions_, positions_, config_);
  k.diagonal().array() += config_.regularization;
  factor_ = factorize(k);
}

Eigen::MatrixXd KrrEstimator::predict(std::span<const Vec3> targets, const Eigen::MatrixXd& values) const {
  if (values.rows() != static_cast<Eigen::Index>(positions_.size()))
    throw std::invalid_argument("krr: value rows do not match measurement count");
  const Eigen::MatrixXd weights = factor_.solve(values);
  return gram_matrix(targets, positions_, config_) * weights;
}

std::vector<double> krr_fit_predict(std::span<const Vec3> measurement_positions, std::span<const double> values,
                                    std::span<const Vec3> targets, const KernelConfig& config) {
  const auto M = static_cast<Eigen::Index>(measurement_positions.size());
  if (M == 0) throw std::invalid_argument("no observations");
  if (values.size() % measurement_positions.size() != 0)
    throw std::invalid_argument("krr: value count is not a multiple of the measurement count");
  const auto S = static_cast<Eigen::Index>(values.size()) / M;
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXd v = Eigen::Map<const RowMajor>(values.data(), M, S);
  const KrrEstimator krr(measurement_positions, config);
  const RowMajor est = krr.predict(targets, v);
  return {est.data(), est.data() + est.size()};
}

}  // namespace atfmag
