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

#include "atfmag/nn/ops.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "atfmag/nn/exact_sum.hpp"

namespace atfmag::nn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Var linear(const Var& input, const Var& weight, const Var& bias) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  require(w.rank() == 2, "linear: weight must be [out,in]");
  const Index in = w.dim(1), out = w.dim(0);
  require(x.cols() == in, "linear: input width " + std::to_string(x.cols()) + " != weight in " + std::to_string(in));
  require(b.size() == out, "linear: bias size mismatch");
  const Index batch = x.rows();

  Shape shape = x.shape();
  if (shape.empty()) shape = {1};
  shape.back() = out;
  Tensor y(shape);
  auto Y = y.as_matrix(batch, out);
  Y.noalias() = x.as_matrix(batch, in) * w.matrix().transpose();
  Y.rowwise() += b.as_matrix(1, out).row(0);

  return Var::make(std::move(y), {input, weight, bias}, [batch, in, out](detail::Node& self) {
    auto dY = self.grad.as_matrix(batch, out);
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    if (xn.requires_grad) {
      auto dX = xn.grad_buffer().as_matrix(batch, in);
      dX.noalias() += dY * wn.value.matrix();
    }
    if (wn.requires_grad) {
      auto dW = wn.grad_buffer().as_matrix(out, in);
      dW.noalias() += dY.transpose() * xn.value.as_matrix(batch, in);
    }
    if (bn.requires_grad) {
      auto db = bn.grad_buffer().as_matrix(1, out);
      db += dY.colwise().sum();
    }
  });
}

namespace {

// y[b] = W[b] x[b] + c[b], where row b of the weights starts at w + b * ws
// and its bias at c + b * cs. Shared by the separate and packed layouts.
void hyper_forward(const double* x, const double* w, Index ws, const double* c, Index cs, double* y, Index batch,
                   Index in, Index out) {
  for (Index b = 0; b < batch; ++b) {
    const double* xb = x + b * in;
    const double* wb = w + b * ws;
    const double* cb = c + b * cs;
    for (Index o = 0; o < out; ++o) {
      const double* wr = wb + o * in;
      double acc = 0.0;
      for (Index i = 0; i < in; ++i) acc += wr[i] * xb[i];
      y[b * out + o] = acc + cb[o];
    }
  }
}

void hyper_backward(const double* dy, const double* x, const double* w, Index ws, double* dx, double* dw, double* dc,
                    Index cs, Index batch, Index in, Index out) {
  for (Index b = 0; b < batch; ++b) {
    const double* dyb = dy + b * out;
    const double* xb = x + b * in;
    const double* wb = w + b * ws;
    for (Index o = 0; o < out; ++o) {
      const double g = dyb[o];
      if (dc) dc[b * cs + o] += g;
      if (dx)
        for (Index i = 0; i < in; ++i) dx[b * in + i] += wb[o * in + i] * g;
      if (dw) {
        double* dwr = dw + b * ws + o * in;
        for (Index i = 0; i < in; ++i) dwr[i] += g * xb[i];
      }
    }
  }
}

}  // namespace

Var hyper_linear(const Var& input, const Var& weight, const Var& bias) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  const Tensor& c = bias.value();
  const Index batch = x.rows(), in = x.cols();
  require(c.rows() == batch, "hyper_linear: bias batch mismatch");
  const Index out = c.cols();
  if (w.rank() == 3) {
    require(w.dim(0) == batch && w.dim(1) == out && w.dim(2) == in,
            "hyper_linear: weight " + shape_string(w.shape()) + " does not match input/bias");
  } else {
    require(w.rows() == batch && w.cols() == out * in, "hyper_linear: packed weight has the wrong width");
  }

  Tensor y(Shape{batch, out});
  hyper_forward(x.data(), w.data(), out * in, c.data(), out, y.data(), batch, in, out);
  return Var::make(std::move(y), {input, weight, bias}, [batch, in, out](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    auto& cn = *self.inputs[2];
    hyper_backward(self.grad.data(), xn.value.data(), wn.value.data(), out * in,
                   xn.requires_grad ? xn.grad_buffer().data() : nullptr,
                   wn.requires_grad ? wn.grad_buffer().data() : nullptr,
                   cn.requires_grad ? cn.grad_buffer().data() : nullptr, out, batch, in, out);
  });
}

Var hyper_linear_packed(const Var& input, const Var& generated, Index out) {
  const Tensor& x = input.value();
  const Tensor& g = generated.value();
  const Index batch = x.rows(), in = x.cols();
  require(out >= 1, "hyper_linear_packed: out must be positive");
  require(g.rows() == batch && g.cols() == out * in + out,
          "hyper_linear_packed: generated " + shape_string(g.shape()) + " does not match input/out");
  const Index stride = g.cols();
  Tensor y(Shape{batch, out});
  hyper_forward(x.data(), g.data(), stride, g.data() + out * in, stride, y.data(), batch, in, out);
  return Var::make(std::move(y), {input, generated}, [batch, in, out, stride](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    double* dg = gn.requires_grad ? gn.grad_buffer().data() : nullptr;
    hyper_backward(self.grad.data(), xn.value.data(), gn.value.data(), stride,
                   xn.requires_grad ? xn.grad_buffer().data() : nullptr, dg, dg ? dg + out * in : nullptr, stride,
                   batch, in, out);
  });
}

Var layer_norm(const Var& input, const Var& gain, const Var& shift, double epsilon) {
  const Tensor& x = input.value();
  const Index rows = x.rows(), dim = x.cols();
  require(dim >= 1, "layer_norm: empty feature dimension");
  require(gain.value().size() == dim && shift.value().size() == dim, "layer_norm: gain/shift size mismatch");

  // keep normalised values and inverse std for the backward pass
  auto normalised = std::make_shared<Tensor>(x.shape());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
  Tensor y(x.shape());
  const double* g = gain.value().data();
  const double* s = shift.value().data();
  for (Index r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * dim;
    double mean = 0.0;
    for (Index d = 0; d < dim; ++d) mean += xr[d];
    mean /= static_cast<double>(dim);
    double var = 0.0;
    for (Index d = 0; d < dim; ++d) var += (xr[d] - mean) * (xr[d] - mean);
    var /= static_cast<double>(dim);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    (*inv_std)[static_cast<std::size_t>(r)] = inv;
    double* nr = normalised->data() + r * dim;
    double* yr = y.data() + r * dim;
    for (Index d = 0; d < dim; ++d) {
      nr[d] = (xr[d] - mean) * inv;
      yr[d] = g[d] * nr[d] + s[d];
    }
  }

  return Var::make(std::move(y), {input, gain, shift}, [rows, dim, normalised, inv_std](detail::Node& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    auto& sn = *self.inputs[2];
    const double* dy = self.grad.data();
    const double* nv = normalised->data();
    const double* g = gn.value.data();
    double* dx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
    double* dg = gn.requires_grad ? gn.grad_buffer().data() : nullptr;
    double* ds = sn.requires_grad ? sn.grad_buffer().data() : nullptr;
    std::vector<double> dn(static_cast<std::size_t>(dim));
    for (Index r = 0; r < rows; ++r) {
      const double* dyr = dy + r * dim;
      const double* nr = nv + r * dim;
      if (dg)
        for (Index d = 0; d < dim; ++d) dg[d] += dyr[d] * nr[d];
      if (ds)
        for (Index d = 0; d < dim; ++d) ds[d] += dyr[d];
      if (!dx) continue;
      double mean_dn = 0.0, mean_dn_n = 0.0;
      for (Index d = 0; d < dim; ++d) {
        dn[static_cast<std::size_t>(d)] = dyr[d] * g[d];
        mean_dn += dn[static_cast<std::size_t>(d)];
        mean_dn_n += dn[static_cast<std::size_t>(d)] * nr[d];
      }
      mean_dn /= static_cast<double>(dim);
      mean_dn_n /= static_cast<double>(dim);
      const double inv = (*inv_std)[static_cast<std::size_t>(r)];
      double* dxr = dx + r * dim;
      for (Index d = 0; d < dim; ++d) dxr[d] += inv * (dn[static_cast<std::size_t>(d)] - mean_dn - nr[d] * mean_dn_n);
    }
  });
}

namespace {

// With e = exp(x) and n = e (e + 2): tanh(softplus(x)) = n / (n + 2) and
// d mish / dx = n / (n + 2) + 4 x e (e + 1) / (n + 2)^2.
constexpr double kMishLinearAbove = 20.0;

inline double mish_value(double x, double& slope) {
  if (x > kMishLinearAbove) {
    slope = 1.0;
    return x;
  }
  const double e = std::exp(x);
  const double n = e * (e + 2.0);
  const double denom = n + 2.0;
  const double t = n / denom;
  slope = t + 4.0 * x * e * (e + 1.0) / (denom * denom);
  return x * t;
}

}  // namespace

double mish(double x) {
  double slope;
  return mish_value(x, slope);
}

Var mish(const Var& input) {
  const Tensor& x = input.value();
  Tensor y(x.shape());
  auto slope = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) y[i] = mish_value(x[i], (*slope)[static_cast<std::size_t>(i)]);
  return Var::make(std::move(y), {input}, [slope](detail::Node& self) {
    auto& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    const double* dy = self.grad.data();
    const double* k = slope->data();
    for (Index i = 0; i < xn.value.size(); ++i) dx[i] += dy[i] * k[i];
  });
}

Var relu(const Var& input) {
  const Tensor& x = input.value();
  Tensor y(x.shape());
  for (Index i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return Var::make(std::move(y), {input}, [](detail::Node& self) {
    auto& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    const double* xv = xn.value.data();
    const double* dy = self.grad.data();
    for (Index i = 0; i < xn.value.size(); ++i)
      if (xv[i] > 0.0) dx[i] += dy[i];
  });
}

Var fourier_features(const Var& input, const Tensor& frequency_matrix) {
  const Tensor& v = input.value();
  require(frequency_matrix.rank() == 2, "fourier_features: frequency matrix must be [K,D]");
  const Index K = frequency_matrix.dim(0), D = frequency_matrix.dim(1);
  require(v.cols() == D, "fourier_features: input width does not match frequency matrix");
  const Index batch = v.rows();

  RowMatrix phase = kTwoPi * (v.as_matrix(batch, D) * frequency_matrix.matrix().transpose());
  Tensor y(Shape{batch, 2 * K});
  for (Index b = 0; b < batch; ++b) {
    double* yr = y.data() + b * 2 * K;
    for (Index k = 0; k < K; ++k) {
      yr[k] = std::cos(phase(b, k));
      yr[K + k] = std::sin(phase(b, k));
    }
  }
  auto freq = std::make_shared<Tensor>(frequency_matrix);
  return Var::make(std::move(y), {input}, [batch, K, D, freq](detail::Node& self) {
    auto& vn = *self.inputs[0];
    const double* yv = self.value.data();
    const double* dy = self.grad.data();
    // d cos(p)/dp = -sin(p), d sin(p)/dp = cos(p)
    RowMatrix dphase(batch, K);
    for (Index b = 0; b < batch; ++b) {
      const double* yr = yv + b * 2 * K;
      const double* dyr = dy + b * 2 * K;
      for (Index k = 0; k < K; ++k) dphase(b, k) = -yr[K + k] * dyr[k] + yr[k] * dyr[K + k];
    }
    auto dV = vn.grad_buffer().as_matrix(batch, D);
    dV.noalias() += kTwoPi * (dphase * freq->matrix());
  });
}

Var lsd_loss(const Var& estimate, const Tensor& truth) {
  const Tensor& e = estimate.value();
  require(e.size() == truth.size() && e.cols() == truth.cols(),
          "lsd_loss: estimate " + shape_string(e.shape()) + " vs truth " + shape_string(truth.shape()));
  const Index pairs = e.rows(), bins = e.cols();
  require(bins >= 1 && pairs >= 1, "lsd_loss: empty input");
  auto root = std::make_shared<std::vector<double>>(static_cast<std::size_t>(pairs));
  double total = 0.0;
  for (Index p = 0; p < pairs; ++p) {
    double acc = 0.0;
    for (Index f = 0; f < bins; ++f) {
      const double d = e[p * bins + f] - truth[p * bins + f];
      acc += d * d;
    }
    // the guarded root only scales the gradient
    (*root)[static_cast<std::size_t>(p)] = std::sqrt(acc / static_cast<double>(bins) + kLsdEpsilon);
    total += std::sqrt(acc / static_cast<double>(bins));
  }
  auto truth_copy = std::make_shared<Tensor>(truth);
  return Var::make(Tensor(Shape{1}, {total / static_cast<double>(pairs)}), {estimate},
                   [pairs, bins, root, truth_copy](detail::Node& self) {
                     auto& en = *self.inputs[0];
                     double* de = en.grad_buffer().data();
                     const double* ev = en.value.data();
                     const double g = self.grad[0] / static_cast<double>(pairs * bins);
                     for (Index p = 0; p < pairs; ++p) {
                       const double inv = g / (*root)[static_cast<std::size_t>(p)];
                       for (Index f = 0; f < bins; ++f) {
                         const Index i = p * bins + f;
                         de[i] += inv * (ev[i] - (*truth_copy)[i]);
                       }
                     }
                   });
}

Var group_mean(const Var& input, std::span<const Index> group, Index num_groups) {
  const Tensor& x = input.value();
  const Index rows = x.rows(), dim = x.cols();
  require(static_cast<Index>(group.size()) == rows, "group_mean: one group id per row required");
  auto members = std::make_shared<std::vector<std::vector<Index>>>(static_cast<std::size_t>(num_groups));
  for (Index r = 0; r < rows; ++r) {
    const Index g = group[static_cast<std::size_t>(r)];
    require(g >= 0 && g < num_groups, "group_mean: group id out of range");
    (*members)[static_cast<std::size_t>(g)].push_back(r);
  }
  Tensor y(Shape{num_groups, dim});
  std::vector<double> column;
  for (Index g = 0; g < num_groups; ++g) {
    const auto& rs = (*members)[static_cast<std::size_t>(g)];
    if (rs.empty()) throw std::invalid_argument("no observations");
    column.resize(rs.size());
    for (Index d = 0; d < dim; ++d) {
      for (std::size_t k = 0; k < rs.size(); ++k) column[k] = x[rs[k] * dim + d];
      // correctly rounded sum: the mean is independent of row order
      y[g * dim + d] = exact_sum(column) / static_cast<double>(rs.size());
    }
  }
  return Var::make(std::move(y), {input}, [dim, members](detail::Node& self) {
    auto& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    const double* dy = self.grad.data();
    for (std::size_t g = 0; g < members->size(); ++g) {
      const auto& rs = (*members)[g];
      const double w = 1.0 / static_cast<double>(rs.size());
      for (Index r : rs)
        for (Index d = 0; d < dim; ++d) dx[r * dim + d] += w * dy[static_cast<Index>(g) * dim + d];
    }
  });
}

Var gather_rows(const Var& input, std::span<const Index> index) {
  const Tensor& x = input.value();
  const Index rows = x.rows(), dim = x.cols();
  const Index n = static_cast<Index>(index.size());
  Tensor y(Shape{n, dim});
  for (Index r = 0; r < n; ++r) {
    const Index src = index[static_cast<std::size_t>(r)];
    require(src >= 0 && src < rows, "gather_rows: index out of range");
    std::copy(x.data() + src * dim, x.data() + (src + 1) * dim, y.data() + r * dim);
  }
  auto idx = std::make_shared<std::vector<Index>>(index.begin(), index.end());
  return Var::make(std::move(y), {input}, [dim, idx](detail::Node& self) {
    auto& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    const double* dy = self.grad.data();
    for (std::size_t r = 0; r < idx->size(); ++r) {
      const Index src = (*idx)[r];
      for (Index d = 0; d < dim; ++d) dx[src * dim + d] += dy[static_cast<Index>(r) * dim + d];
    }
  });
}

Var concat_columns(const Var& left, const Var& right) {
  const Tensor& a = left.value();
  const Tensor& b = right.value();
  require(a.rows() == b.rows(), "concat_columns: row mismatch");
  const Index rows = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor y(Shape{rows, ca + cb});
  y.as_matrix(rows, ca + cb).leftCols(ca) = a.as_matrix(rows, ca);
  y.as_matrix(rows, ca + cb).rightCols(cb) = b.as_matrix(rows, cb);
  return Var::make(std::move(y), {left, right}, [rows, ca, cb](detail::Node& self) {
    auto dY = self.grad.as_matrix(rows, ca + cb);
    if (self.inputs[0]->requires_grad) self.inputs[0]->grad_buffer().as_matrix(rows, ca) += dY.leftCols(ca);
    if (self.inputs[1]->requires_grad) self.inputs[1]->grad_buffer().as_matrix(rows, cb) += dY.rightCols(cb);
  });
}

Var slice_columns(const Var& input, Index begin, Index count) {
  const Tensor& x = input.value();
  const Index rows = x.rows(), cols = x.cols();
  require(begin >= 0 && count >= 0 && begin + count <= cols, "slice_columns: range out of bounds");
  Tensor y(Shape{rows, count});
  y.as_matrix(rows, count) = x.as_matrix(rows, cols).middleCols(begin, count);
  return Var::make(std::move(y), {input}, [rows, cols, begin, count](detail::Node& self) {
    self.inputs[0]->grad_buffer().as_matrix(rows, cols).middleCols(begin, count) +=
        self.grad.as_matrix(rows, count);
  });
}

Var reshape(const Var& input, Shape shape) {
  Tensor y = input.value().reshaped(std::move(shape));
  return Var::make(std::move(y), {input}, [](detail::Node& self) {
    auto& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    for (Index i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

Var sum(const Var& input) {
  double total = 0.0;
  for (double v : input.value().values()) total += v;
  return Var::make(Tensor(Shape{1}, {total}), {input}, [](detail::Node& self) {
    auto& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    for (Index i = 0; i < xn.value.size(); ++i) dx[i] += self.grad[0];
  });
}

Var scale(const Var& input, double factor) {
  Tensor y = input.value();
  for (double& v : y.values()) v *= factor;
  return Var::make(std::move(y), {input}, [factor](detail::Node& self) {
    auto& xn = *self.inputs[0];
    double* dx = xn.grad_buffer().data();
    for (Index i = 0; i < self.grad.size(); ++i) dx[i] += factor * self.grad[i];
  });
}

Var add(const Var& a, const Var& b) {
  require(a.value().size() == b.value().size(), "add: size mismatch");
  Tensor y = a.value();
  for (Index i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return Var::make(std::move(y), {a, b}, [](detail::Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      double* d = in->grad_buffer().data();
      for (Index i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

}  // namespace atfmag::nn
