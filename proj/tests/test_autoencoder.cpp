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

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "atfmag/autoencoder.hpp"
#include "atfmag/nn/ops.hpp"
#include "support.hpp"

using namespace atfmag;

namespace {

AeConfig small_config() {
  AeConfig c;
  c.latent_dim = 4;
  c.encoder_hidden = {8};
  c.decoder_hidden = {8};
  c.generator_width = 16;
  c.generator_depth = 2;
  c.ffm = {4, 1.0};
  c.epochs = 4;
  c.schedule = {{2}, {1e-3, 1e-4}};
  c.training_counts = {3, 5};
  c.validation_count = 3;
  return c;
}

ConditionedAutoencoder make_model(const AeConfig& c = small_config(), std::uint64_t seed = 4) {
  const auto& ds = test::tiny_dataset();
  return ConditionedAutoencoder(c, InputScaling::from_dataset(ds, c.effective_count_max()), training_statistics(ds), seed);
}

Observations obs(std::size_t source, std::vector<std::size_t> idx) { return observe(test::tiny_dataset(), source, idx); }

const AeTrainResult& trained() {
  static const AeTrainResult r = ae_train(test::tiny_dataset(), small_config(), 8);
  return r;
}

}  // namespace

TEST_CASE("generated weights follow the layer sizes") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const auto leaves = model.params().bind(false);
  const auto cond = model.decoder_conditions(std::span(ds.targets.coords).first(2), ds.sources.coords[0], ds.frequencies);
  const auto layers = model.generate_weights(leaves, AeNetwork::decoder, cond);
  const auto dims = model.layer_dims(AeNetwork::decoder);
  REQUIRE(layers.size() == dims.size());
  CHECK(dims.back().second == 1);
  CHECK(model.layer_dims(AeNetwork::encoder).back().second == 4);
  const auto rows = static_cast<nn::Index>(2 * ds.num_bins());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    CHECK(layers[i].in == dims[i].first);
    CHECK(layers[i].out == dims[i].second);
    CHECK(layers[i].weight().value().shape() == nn::Shape{rows, dims[i].first * dims[i].second});
    CHECK(layers[i].bias().value().shape() == nn::Shape{rows, dims[i].second});
  }
}

TEST_CASE("identical conditions generate identical weights") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const Vec3 p = ds.targets.coords[3];
  const std::vector<Vec3> twice{p, p};
  const std::vector<double> f{ds.frequencies[10]};
  const auto layers = model.generate_weights(model.params().bind(false), AeNetwork::encoder,
                                             model.encoder_conditions(twice, ds.sources.coords[1], f, 5.0));
  for (const auto& l : layers) {
    const auto w = l.packed.value().matrix();
    CHECK(w.row(0) == w.row(1));
  }
}

TEST_CASE("full pipeline gradients match finite differences") {
  AeConfig c = small_config();
  c.latent_dim = 2;
  c.encoder_hidden = {4};
  c.decoder_hidden = {4};
  c.generator_width = 4;
  c.ffm = {2, 1.0};
  const auto model = make_model(c, 12);
  const auto& ds = test::tiny_dataset();
  const auto o = obs(2, {1, 7, 20});
  const std::vector<Vec3> targets{ds.targets.coords[0], ds.targets.coords[13]};
  const std::vector<double> freqs{ds.frequencies[3], ds.frequencies[40]};
  Observations o2 = o;
  o2.values.clear();
  for (std::size_t m = 0; m < o.count(); ++m)
    for (std::size_t f : {3u, 40u}) o2.values.push_back(o.values[m * ds.num_bins() + f]);
  const auto loss = [&](const std::vector<nn::Var>& leaves) {
    return test::probe_loss(model.forward(leaves, o2, ds.sources.coords[2], targets, freqs));
  };
  CHECK(test::parameter_gradient_check(model.params(), loss) < 1e-4);
}

TEST_CASE("encoder is deterministic, finite and sees the count") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const auto leaves = model.params().bind(false);
  const std::vector<Vec3> where(26, ds.targets.coords[5]);
  const std::vector<double> f{ds.frequencies[7]};
  nn::Tensor values({26, 1});
  for (nn::Index i = 0; i < 26; ++i) values[i] = -200.0 + 10.0 * static_cast<double>(i);  // -200 .. 50 dB
  const auto cond = model.encoder_conditions(where, ds.sources.coords[0], f, 5.0);
  const nn::Tensor a = model.encode(leaves, values, cond).value();
  CHECK(a.shape() == nn::Shape{26, 4});
  CHECK(a.all_finite());
  CHECK(a.storage() == model.encode(leaves, values, cond).value().storage());
  const auto cond10 = model.encoder_conditions(where, ds.sources.coords[0], f, 10.0);
  CHECK(a.storage() != model.encode(leaves, values, cond10).value().storage());
}

TEST_CASE("aggregate is the per-column mean") {
  nn::Tensor one({1, 3}, std::vector<double>{0.5, -1.0, 2.0});
  CHECK(aggregate(one).storage() == one.storage());
  nn::Tensor same({4, 2}, std::vector<double>{0.1, 7.0, 0.1, 7.0, 0.1, 7.0, 0.1, 7.0});
  CHECK(aggregate(same).storage() == nn::Storage{0.1, 7.0});
  nn::Tensor three({3, 2}, std::vector<double>{1.0, -2.0, 0.25, 4.5, -3.0, 1.0});
  const nn::Tensor m = aggregate(three);
  CHECK(m.shape() == nn::Shape{2});
  CHECK(std::abs(m[0] - (1.0 + 0.25 - 3.0) / 3.0) < 1e-15);
  CHECK(std::abs(m[1] - (-2.0 + 4.5 + 1.0) / 3.0) < 1e-15);
  CHECK_THROWS_WITH_AS(aggregate(nn::Tensor({0, 2})), "no observations", std::invalid_argument);
}

TEST_CASE("decoder is deterministic and position dependent") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const auto proto = ae_prototypes(model, obs(0, {0, 4, 8}), ds.sources.coords[0], ds.frequencies);
  const auto a = ae_decode(model, proto, ds.sources.coords[0], ds.targets.coords, ds.frequencies);
  CHECK(a == ae_decode(model, proto, ds.sources.coords[0], ds.targets.coords, ds.frequencies));
  const std::size_t F = ds.num_bins();
  CHECK(!std::equal(a.begin(), a.begin() + static_cast<long>(F), a.begin() + static_cast<long>(F)));
}

TEST_CASE("prediction ignores the order of observations") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const Vec3 s = ds.sources.coords[6];
  const auto a = ae_predict(model, obs(6, {2, 11, 17, 25, 9}), s, ds.targets.coords, ds.frequencies);
  const auto b = ae_predict(model, obs(6, {25, 9, 2, 17, 11}), s, ds.targets.coords, ds.frequencies);
  CHECK(a == b);
}

TEST_CASE("duplicated observations leave the prototype unchanged") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const Vec3 s = ds.sources.coords[6];
  AePredictOptions opt;
  opt.count_override = 3.0;
  const auto a = ae_predict(model, obs(6, {2, 11, 17}), s, ds.targets.coords, ds.frequencies, opt);
  const auto b = ae_predict(model, obs(6, {2, 11, 17, 2, 11, 17}), s, ds.targets.coords, ds.frequencies, opt);
  CHECK(a == b);
}

TEST_CASE("prediction is prototype decoding and leaves the model alone") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const auto before = model.params().full_hash();
  const Vec3 s = ds.sources.coords[1];
  const auto o = obs(1, {3, 4, 5, 6});
  const auto a = ae_predict(model, o, s, ds.targets.coords, ds.frequencies);
  CHECK(a == ae_decode(model, ae_prototypes(model, o, s, ds.frequencies), s, ds.targets.coords, ds.frequencies));
  CHECK(model.params().full_hash() == before);

  AePredictOptions chunks;
  chunks.chunk_rows = 7;
  chunks.workers = 3;
  CHECK(a == ae_predict(model, o, s, ds.targets.coords, ds.frequencies, chunks));

  const std::vector<Vec3> off{{2.0101, 2.9977, 1.4321}};
  const auto e = ae_predict(model, o, s, off, ds.frequencies);
  CHECK(e.size() == ds.num_bins());
  CHECK(std::all_of(e.begin(), e.end(), [](double v) { return std::isfinite(v); }));
}

TEST_CASE("shared-prototype decoding agrees with the training graph") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const Vec3 s = ds.sources.coords[4];
  const auto o = obs(4, {1, 7, 13, 20});
  const auto a = ae_predict(model, o, s, ds.targets.coords, ds.frequencies);
  const auto leaves = model.params().bind(false);
  const nn::Tensor b = model.forward(leaves, o, s, ds.targets.coords, ds.frequencies).value();
  REQUIRE(static_cast<std::size_t>(b.size()) == a.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[static_cast<nn::Index>(i)]) / std::max(1.0, std::abs(b[static_cast<nn::Index>(i)])));
  CHECK(worst < 1e-10);

  CHECK_THROWS_AS(model.decode_shared(nn::Tensor({static_cast<nn::Index>(ds.num_bins()), 5}), ds.targets.coords, s, ds.frequencies),
                  std::invalid_argument);
}

TEST_CASE("decoding does not see the observations except through the prototype") {
  const auto& ds = test::tiny_dataset();
  const auto model = make_model();
  const Vec3 s = ds.sources.coords[1];
  const nn::Tensor zero({static_cast<nn::Index>(ds.num_bins()), 4});
  const auto a = ae_decode(model, zero, s, ds.targets.coords, ds.frequencies);
  CHECK(a == ae_decode(model, zero, s, ds.targets.coords, ds.frequencies));
  CHECK(ae_predict(model, obs(1, {0, 1}), s, ds.targets.coords, ds.frequencies) !=
        ae_predict(model, obs(1, {20, 21}), s, ds.targets.coords, ds.frequencies));
}

TEST_CASE("training is reproducible and keeps the best epoch") {
  const auto& r = trained();
  REQUIRE(r.history.epochs.size() == 4);
  double best = r.history.epochs.front().validation_loss;
  std::size_t arg = 1;
  for (const auto& e : r.history.epochs)
    if (e.validation_loss < best) best = e.validation_loss, arg = e.epoch;
  CHECK(r.history.best_epoch == arg);
  CHECK(r.history.best_validation_loss == best);
  CHECK(ae_validation_loss(r.model, test::tiny_dataset(), 8) == best);

  const auto again = ae_train(test::tiny_dataset(), small_config(), 8);
  CHECK(again.model.params().hash() == r.model.params().hash());
}

TEST_CASE("training never reads the test split") {
  AtfDataset ds = test::tiny_dataset();
  for (std::size_t l : ds.split.indices(Split::test))
    for (std::size_t n = 0; n < ds.num_targets(); ++n)
      for (std::size_t f = 0; f < ds.num_bins(); ++f) ds.values[ds.offset(n, l) + f] += 13.0f;
  CHECK(ae_train(ds, small_config(), 8).model.params().hash() == trained().model.params().hash());
}

TEST_CASE("a diverging run names the step") {
  AeConfig c = small_config();
  c.schedule = LearningRateSchedule::constant(1e300);
  CHECK_THROWS_WITH_AS(ae_train(test::tiny_dataset(), c, 8), doctest::Contains("at step"), std::runtime_error);
}

TEST_CASE("checkpoint round trip") {
  const auto& ds = test::tiny_dataset();
  const auto& model = trained().model;
  const auto path = std::filesystem::temp_directory_path() / "atfmag_ae_test.ckpt";
  model.save(path, {{"note", "x"}});
  const auto back = ConditionedAutoencoder::load(path);
  CHECK(back.params().full_hash() == model.params().full_hash());
  CHECK(back.standardization().mean == model.standardization().mean);
  const auto o = obs(7, {1, 2, 3, 4, 5});
  CHECK(ae_predict(back, o, ds.sources.coords[7], ds.targets.coords, ds.frequencies) ==
        ae_predict(model, o, ds.sources.coords[7], ds.targets.coords, ds.frequencies));
  std::filesystem::remove(path);
}
