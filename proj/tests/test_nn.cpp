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

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "atfmag/nn/exact_sum.hpp"
#include "atfmag/nn/ops.hpp"
#include "atfmag/nn/parameters.hpp"
#include "support.hpp"

using namespace atfmag;
using namespace atfmag::nn;
using test::gradient_check;
using test::probe_loss;
using test::random_tensor;

namespace {
Var C(const Tensor& t) { return Var::constant(t); }
}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.rows() == 6);
  CHECK(t.cols() == 4);
  CHECK(shape_string(t.shape()) == "[2,3,4]");
  CHECK_THROWS(Tensor({2, 2}, std::vector<double>{1.0}));
  CHECK_THROWS(t.reshaped({5, 5}));
}

TEST_CASE("linear against a naive matmul") {
  Rng rng(1);
  const Tensor x = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({5}, rng);
  const Tensor y = linear(C(x), C(w), C(b)).value();
  for (Index i = 0; i < 3; ++i)
    for (Index o = 0; o < 5; ++o) {
      double acc = b[o];
      for (Index k = 0; k < 4; ++k) acc += x[i * 4 + k] * w[o * 4 + k];
      CHECK(std::abs(y[i * 5 + o] - acc) <= 1e-12);
    }
}

TEST_CASE("linear identity and zero input") {
  Rng rng(2);
  const Tensor x = random_tensor({3, 3}, rng);
  Tensor eye({3, 3});
  for (Index i = 0; i < 3; ++i) eye[i * 4] = 1.0;
  CHECK(linear(C(x), C(eye), C(Tensor({3}))).value().storage() == x.storage());
  const Tensor b = random_tensor({3}, rng);
  const Tensor y = linear(C(Tensor({2, 3})), C(eye), C(b)).value();
  for (Index i = 0; i < 2; ++i)
    for (Index o = 0; o < 3; ++o) CHECK(y[i * 3 + o] == b[o]);
  CHECK_THROWS(linear(C(x), C(Tensor({3, 4})), C(b)));
}

TEST_CASE("hyper_linear reduces to linear and to its bias") {
  Rng rng(3);
  const Tensor x = random_tensor({1, 4}, rng), w = random_tensor({3, 4}, rng), b = random_tensor({3}, rng);
  const Tensor y1 = linear(C(x), C(w), C(b)).value();
  const Tensor y2 = hyper_linear(C(x), C(w.reshaped({1, 3, 4})), C(b.reshaped({1, 3}))).value();
  for (Index i = 0; i < 3; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

  const Tensor xb = random_tensor({5, 4}, rng), bb = random_tensor({5, 3}, rng);
  CHECK(hyper_linear(C(xb), C(Tensor({5, 3, 4})), C(bb)).value().storage() == bb.storage());
  CHECK_THROWS(hyper_linear(C(xb), C(Tensor({4, 3, 4})), C(bb)));
}

TEST_CASE("hyper_linear_packed matches the unpacked form") {
  Rng rng(4);
  const Index B = 6, in = 3, out = 2;
  const Tensor x = random_tensor({B, in}, rng), g = random_tensor({B, out * in + out}, rng);
  Tensor w({B, out * in}), b({B, out});
  for (Index r = 0; r < B; ++r) {
    for (Index k = 0; k < out * in; ++k) w[r * out * in + k] = g[r * (out * in + out) + k];
    for (Index k = 0; k < out; ++k) b[r * out + k] = g[r * (out * in + out) + out * in + k];
  }
  const auto p = hyper_linear_packed(C(x), C(g), out).value();
  const auto u = hyper_linear(C(x), C(w), C(b)).value();
  for (Index i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(u[i]).epsilon(1e-15));
}

TEST_CASE("finite-difference gradients of every op") {
  Rng rng(5);
  SUBCASE("linear") {
    CHECK(gradient_check({random_tensor({3, 4}, rng), random_tensor({2, 4}, rng), random_tensor({2}, rng)},
                         [](const auto& v) { return probe_loss(linear(v[0], v[1], v[2])); }) < 1e-4);
  }
  SUBCASE("hyper_linear") {
    CHECK(gradient_check({random_tensor({3, 4}, rng), random_tensor({3, 2, 4}, rng), random_tensor({3, 2}, rng)},
                         [](const auto& v) { return probe_loss(hyper_linear(v[0], v[1], v[2])); }) < 1e-4);
  }
  SUBCASE("hyper_linear_packed") {
    CHECK(gradient_check({random_tensor({3, 4}, rng), random_tensor({3, 2 * 4 + 2}, rng)},
                         [](const auto& v) { return probe_loss(hyper_linear_packed(v[0], v[1], 2)); }) < 1e-4);
  }
  SUBCASE("layer_norm") {
    CHECK(gradient_check({random_tensor({3, 5}, rng), random_tensor({5}, rng, 0.5, 1.5), random_tensor({5}, rng)},
                         [](const auto& v) { return probe_loss(layer_norm(v[0], v[1], v[2])); }) < 1e-4);
  }
  SUBCASE("mish") {
    CHECK(gradient_check({random_tensor({4, 6}, rng, -4.0, 4.0)}, [](const auto& v) { return probe_loss(mish(v[0])); }) <
          1e-4);
  }
  SUBCASE("relu away from the kink") {
    Tensor x = random_tensor({4, 6}, rng);
    for (auto& e : x.values()) e += e > 0 ? 0.1 : -0.1;
    CHECK(gradient_check({x}, [](const auto& v) { return probe_loss(relu(v[0])); }) < 1e-6);
  }
  SUBCASE("fourier_features") {
    const Tensor F = random_tensor({3, 2}, rng);
    CHECK(gradient_check({random_tensor({4, 2}, rng)}, [&](const auto& v) { return probe_loss(fourier_features(v[0], F)); }) <
          1e-4);
  }
  SUBCASE("lsd_loss") {
    const Tensor truth = random_tensor({2, 2, 3}, rng, -10.0, 10.0);
    CHECK(gradient_check({random_tensor({2, 2, 3}, rng, -10.0, 10.0)}, [&](const auto& v) { return lsd_loss(v[0], truth); }) <
          1e-4);
  }
  SUBCASE("group_mean and gather_rows") {
    const std::vector<Index> group{0, 1, 0, 2, 1, 0}, index{2, 0, 1, 1, 2};
    CHECK(gradient_check({random_tensor({6, 3}, rng)},
                         [&](const auto& v) { return probe_loss(gather_rows(group_mean(v[0], group, 3), index)); }) < 1e-4);
  }
  SUBCASE("structural ops") {
    CHECK(gradient_check({random_tensor({3, 4}, rng), random_tensor({3, 2}, rng)},
                         [](const auto& v) {
                           Var c = concat_columns(v[0], v[1]);
                           Var s = slice_columns(c, 1, 4);
                           Var r = reshape(s, {2, 6});
                           return probe_loss(add(scale(r, -1.7), r));
                         }) < 1e-4);
  }
}

TEST_CASE("layer_norm identities") {
  const Tensor row({1, 4}, std::vector<double>{3.0, 3.0, 3.0, 3.0});
  const Tensor gain({4}, std::vector<double>{2.0, 2.0, 2.0, 2.0}), shift({4}, std::vector<double>{0.1, -0.2, 0.3, 0.4});
  const auto out = layer_norm(C(row), C(gain), C(shift)).value();
  for (Index i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(shift[i]).epsilon(1e-12));

  Rng rng(6);
  const auto y = layer_norm(C(random_tensor({3, 7}, rng)), C(Tensor({7}, 1.0)), C(Tensor({7}))).value();
  for (Index r = 0; r < 3; ++r) {
    double m = 0.0;
    for (Index c = 0; c < 7; ++c) m += y[r * 7 + c];
    CHECK(std::abs(m / 7.0) < 1e-6);
  }
}

TEST_CASE("mish values") {
  CHECK(mish(0.0) == 0.0);
  CHECK(std::abs(mish(-20.0)) < 1e-6);
  CHECK(mish(30.0) == doctest::Approx(30.0).epsilon(1e-15));
  CHECK(mish(1.0) == doctest::Approx(1.0 * std::tanh(std::log1p(std::exp(1.0)))).epsilon(1e-14));
  CHECK(mish(1.0) == doctest::Approx(0.865098).epsilon(1e-6));
  const Tensor x({1, 3}, std::vector<double>{-2.0, 0.5, 7.0});
  const auto y = mish(C(x)).value();
  for (Index i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(x[i] * std::tanh(std::log1p(std::exp(x[i])))).epsilon(1e-14));
}

TEST_CASE("relu values") {
  const auto y = relu(C(Tensor({1, 3}, std::vector<double>{-1.0, 2.0, 0.0}))).value();
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 0.0);
}

TEST_CASE("fourier feature values") {
  Rng rng(7);
  const Tensor F = random_tensor({4, 3}, rng);
  const auto zero = fourier_features(C(Tensor({1, 3})), F).value();
  for (Index k = 0; k < 4; ++k) {
    CHECK(zero[k] == 1.0);
    CHECK(zero[4 + k] == 0.0);
  }
  const auto y = fourier_features(C(random_tensor({5, 3}, rng, -3.0, 3.0)), F).value();
  for (double v : y.values()) CHECK(std::abs(v) <= 1.0);
  const Tensor F1({1, 3}, std::vector<double>{1.0, 0.0, 0.0});
  const auto q = fourier_features(C(Tensor({1, 3}, std::vector<double>{0.25, 0.7, -0.2})), F1).value();
  CHECK(std::abs(q[0] - std::cos(std::numbers::pi / 2)) < 1e-15);
  CHECK(q[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("lsd_loss against the direct formula") {
  Rng rng(8);
  const Tensor est = random_tensor({2, 2, 3}, rng, -30.0, 0.0), truth = random_tensor({2, 2, 3}, rng, -30.0, 0.0);
  double total = 0.0;
  for (int p = 0; p < 4; ++p) {
    double acc = 0.0;
    for (int f = 0; f < 3; ++f) acc += std::pow(est[p * 3 + f] - truth[p * 3 + f], 2);
    total += std::sqrt(acc / 3.0);
  }
  CHECK(std::abs(lsd_loss(C(est), truth).value()[0] - total / 4.0) <= 1e-12);
}

TEST_CASE("lsd_loss constant offset and exact match") {
  Rng rng(9);
  const Tensor truth = random_tensor({4, 5, 8}, rng, -60.0, -10.0);
  for (double c : {3.5, -7.25, 0.0}) {
    Tensor est = truth;
    for (auto& v : est.values()) v += c;
    CHECK(std::abs(lsd_loss(C(est), truth).value()[0] - std::abs(c)) <= 1e-12);
  }
  Var e = Var::parameter(truth);
  backward(lsd_loss(e, truth));
  const Tensor g = e.grad();
  for (double v : g.values()) CHECK(v == 0.0);
  CHECK(lsd_loss(C(truth), truth).value()[0] == 0.0);
  CHECK(lsd_loss(C(random_tensor({4, 5, 8}, rng)), truth).value()[0] > 0.0);
}

TEST_CASE("group_mean is order independent") {
  Rng rng(10);
  const Tensor x = random_tensor({6, 2}, rng);
  const std::vector<Index> group{0, 0, 0, 1, 1, 1};
  Tensor perm({6, 2});
  const int order[6] = {2, 0, 1, 5, 3, 4};
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 2; ++c) perm[r * 2 + c] = x[order[r] * 2 + c];
  CHECK(group_mean(C(x), group, 2).value().storage() == group_mean(C(perm), group, 2).value().storage());
  CHECK_THROWS(group_mean(C(x), std::vector<Index>{0, 0, 0, 0, 0, 0}, 2));
}

TEST_CASE("exact_sum is correctly rounded and order free") {
  const std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  CHECK(exact_sum(v) == 2.0);
  // dyadic values: the exact sum is an integer multiple of 2^-30
  Rng rng(11);
  std::vector<double> a(500);
  std::int64_t total = 0;
  for (auto& x : a) {
    const auto k = static_cast<std::int64_t>(rng.next_u64() >> 14) - (std::int64_t{1} << 49);
    total += k;
    x = std::ldexp(static_cast<double>(k), -30);
  }
  const double s = exact_sum(a);
  CHECK(s == std::ldexp(static_cast<double>(total), -30));
  for (int t = 0; t < 5; ++t) {
    rng.shuffle(a);
    CHECK(exact_sum(a) == s);
  }
}

TEST_CASE("backward accumulates through shared nodes") {
  Var x = Var::parameter(Tensor({1}, std::vector<double>{3.0}));
  Var y = add(x, scale(x, 2.0));  // 3x
  backward(sum(y));
  CHECK(x.grad()[0] == 3.0);
  Var k = Var::constant(Tensor({1}, 1.0));
  CHECK_FALSE(add(k, k).requires_grad());
}

TEST_CASE("adam: zero gradient") {
  ModelParameters q;
  q.add("w", Tensor({2}, std::vector<double>{1.0, -2.0}));
  q.adam_step(std::vector<Tensor>{Tensor({2})}, 0.1);
  CHECK(q.value(0).storage() == Storage{1.0, -2.0});
  CHECK(q.step() == 1);

  ModelParameters p;
  p.add("w", Tensor({1}, 1.0));
  p.adam_step(std::vector<Tensor>{Tensor({1}, 0.5)}, 0.1);
  const double m = p.entry(0).first_moment[0], v = p.entry(0).second_moment[0];
  p.adam_step(std::vector<Tensor>{Tensor({1})}, 0.1);
  CHECK(p.entry(0).first_moment[0] == 0.9 * m);
  CHECK(p.entry(0).second_moment[0] == 0.999 * v);
}

TEST_CASE("adam: first step magnitude is the learning rate") {
  for (double g : {3.0, -0.02}) {
    ModelParameters p;
    p.add("w", Tensor({1}, std::vector<double>{0.5}));
    p.adam_step(std::vector<Tensor>{Tensor({1}, std::vector<double>{g})}, 1e-3);
    CHECK(std::abs(p.value(0)[0] - 0.5) == doctest::Approx(1e-3 * std::abs(g) / (std::abs(g) + 1e-8)).epsilon(1e-9));
  }
}

TEST_CASE("adam: three steps on w^2 match a hand-rolled trace") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double w = 1.5, m = 0.0, v = 0.0;
  ModelParameters p;
  p.add("w", Tensor({1}, std::vector<double>{w}));
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * w;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    w -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);

    auto leaves = p.bind(true);
    // w * w as a 1x1 hyper-linear map of w with weight w
    backward(sum(hyper_linear(reshape(leaves[0], {1, 1}), reshape(leaves[0], {1, 1, 1}), C(Tensor({1, 1})))));
    p.adam_step(p.gradients(leaves), lr);
    CHECK(std::abs(p.value(0)[0] - w) <= 1e-10);
  }
}

TEST_CASE("adam: non-finite gradient") {
  ModelParameters p;
  p.add("w", Tensor({1}, 1.0));
  CHECK_THROWS_WITH(p.adam_step(std::vector<Tensor>{Tensor({1}, std::nan(""))}, 0.1), "diverged");
  CHECK(p.step() == 0);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(12);
  ModelParameters p;
  p.add("a", random_tensor({3, 4}, rng));
  p.add("ffm", random_tensor({2, 3}, rng), false);
  p.adam_step(std::vector<Tensor>{random_tensor({3, 4}, rng), Tensor({2, 3})}, 0.01);
  const auto path = std::filesystem::temp_directory_path() / "atfmag_ckpt_test.bin";
  save_checkpoint(path, p, R"({"k":1})");
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.metadata == R"({"k":1})");
  CHECK(c.params.full_hash() == p.full_hash());
  CHECK_FALSE(c.params.entry(1).trainable);
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
