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

#include "atfmag/neural_field.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "atfmag/json_io.hpp"
#include "atfmag/nn/ops.hpp"
#include "atfmag/rng.hpp"

namespace atfmag {

namespace {

constexpr std::size_t kPredictChunkRows = 8192;

std::string layer_name(std::size_t i, const char* what) {
  return "layer" + std::to_string(i) + "." + what;
}

}  // namespace

NfConfig NfConfig::desk() {
  NfConfig c;
  c.ffm = {32, 4.0};
  c.epochs = 300;
  c.pairs_per_epoch = 2048;
  c.schedule = {{170, 255}, {1e-3, 1e-4, 1e-5}};
  return c;
}

void NfConfig::validate() const {
  if (hidden_layers < 1 || hidden_width < 1) throw std::invalid_argument("nf: hidden layers and width must be positive");
  if (ffm.features < 1) throw std::invalid_argument("nf: need at least one Fourier feature");
  if (batch_pairs < 1) throw std::invalid_argument("nf: batch_pairs must be positive");
  if (!(finetune_learning_rate > 0.0)) throw std::invalid_argument("nf: fine-tune learning rate must be positive");
  schedule.validate();
}

void to_json(nlohmann::json& j, const NfConfig& c) {
  j = nlohmann::json{{"hidden_layers", c.hidden_layers},   {"hidden_width", c.hidden_width},
                     {"ffm", c.ffm},                       {"epochs", c.epochs},
                     {"batch_pairs", c.batch_pairs},       {"pairs_per_epoch", c.pairs_per_epoch},
                     {"schedule", c.schedule},             {"finetune_epochs", c.finetune_epochs},
                     {"finetune_learning_rate", c.finetune_learning_rate}};
}

void from_json(const nlohmann::json& j, NfConfig& c) {
  read_optional(j, "hidden_layers", c.hidden_layers);
  read_optional(j, "hidden_width", c.hidden_width);
  read_optional(j, "ffm", c.ffm);
  read_optional(j, "epochs", c.epochs);
  read_optional(j, "batch_pairs", c.batch_pairs);
  read_optional(j, "pairs_per_epoch", c.pairs_per_epoch);
  read_optional(j, "schedule", c.schedule);
  read_optional(j, "finetune_epochs", c.finetune_epochs);
  read_optional(j, "finetune_learning_rate", c.finetune_learning_rate);
}

NeuralField::NeuralField(const NfConfig& config, const InputScaling& scaling, std::uint64_t seed)
    : config_(config), scaling_(scaling) {
  config_.validate();
  Rng rng = Rng::derive(seed, "nf-init");
  const auto K = static_cast<nn::Index>(config_.ffm.features);
  params_.add("ffm.frequencies", nn::normal_tensor({K, kDecoderConditionWidth}, config_.ffm.scale, rng), false);
  nn::Index fan_in = 2 * K;
  const auto width = static_cast<nn::Index>(config_.hidden_width);
  for (std::size_t i = 0; i < config_.hidden_layers; ++i) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    params_.add(layer_name(i, "weight"), nn::uniform_tensor({width, fan_in}, bound, rng));
    params_.add(layer_name(i, "bias"), nn::uniform_tensor({width}, bound, rng));
    fan_in = width;
  }
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  params_.add("head.weight", nn::uniform_tensor({1, fan_in}, bound, rng));
  params_.add("head.bias", nn::uniform_tensor({1}, bound, rng));
}

nn::Var NeuralField::forward(const std::vector<nn::Var>& leaves, const nn::Tensor& conditions) const {
  // entry order: ffm, (weight, bias) per hidden layer, head weight, head bias
  nn::Var h = nn::fourier_features(nn::Var::constant(conditions), params_.value(0));
  std::size_t k = 1;
  for (std::size_t i = 0; i < config_.hidden_layers; ++i, k += 2) h = nn::relu(nn::linear(h, leaves[k], leaves[k + 1]));
  return nn::linear(h, leaves[k], leaves[k + 1]);
}

nn::Tensor NeuralField::conditions(std::span<const Vec3> receivers, const Vec3& source,
                                   std::span<const double> frequencies) const {
  const auto F = static_cast<nn::Index>(frequencies.size());
  nn::Tensor rows({static_cast<nn::Index>(receivers.size()) * F, kDecoderConditionWidth});
  for (std::size_t n = 0; n < receivers.size(); ++n)
    for (nn::Index f = 0; f < F; ++f) {
      const nn::Index r = static_cast<nn::Index>(n) * F + f;
      scaling_.fill({rows.data() + r * kDecoderConditionWidth, kDecoderConditionWidth}, receivers[n], source,
                    frequencies[static_cast<std::size_t>(f)]);
    }
  return rows;
}

double NeuralField::predict(const Vec3& receiver, const Vec3& source, double frequency) const {
  return predict(std::span<const Vec3>(&receiver, 1), source, std::span<const double>(&frequency, 1))[0];
}

std::vector<double> NeuralField::predict(std::span<const Vec3> targets, const Vec3& source,
                                         std::span<const double> frequencies) const {
  const auto leaves = params_.bind(false);
  const std::size_t F = frequencies.size();
  const std::size_t per_chunk = std::max<std::size_t>(1, kPredictChunkRows / std::max<std::size_t>(F, 1));
  std::vector<double> out;
  out.reserve(targets.size() * F);
  for (std::size_t begin = 0; begin < targets.size(); begin += per_chunk) {
    const std::size_t count = std::min(per_chunk, targets.size() - begin);
    nn::Var y = forward(leaves, conditions(targets.subspan(begin, count), source, frequencies));
    out.insert(out.end(), y.value().values().begin(), y.value().values().end());
  }
  return out;
}

void NeuralField::zero_output_layer() {
  params_.value(params_.index_of("head.weight")).fill(0.0);
  params_.value(params_.index_of("head.bias")).fill(0.0);
}

void NeuralField::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta{{"model", "neural_field"}, {"config", config_}, {"scaling", scaling_}, {"extra", extra}};
  nn::save_checkpoint(path, params_, meta.dump());
}

NeuralField NeuralField::load(const std::filesystem::path& path) {
  auto ck = nn::load_checkpoint(path);
  auto meta = nlohmann::json::parse(ck.metadata);
  if (meta.value("model", "") != "neural_field") throw std::runtime_error(path.string() + ": not a neural-field checkpoint");
  NeuralField nf;
  nf.config_ = meta.at("config").get<NfConfig>();
  nf.scaling_ = meta.at("scaling").get<InputScaling>();
  nf.params_ = std::move(ck.params);
  const std::size_t expected = 1 + 2 * nf.config_.hidden_layers + 2;
  if (nf.params_.size() != expected) throw std::runtime_error(path.string() + ": parameter layout does not match config");
  return nf;
}

namespace {

// One Adam step on a batch of (receiver, source) pairs with all bins.
double nf_step(NeuralField& model, const nn::Tensor& conditions, const nn::Tensor& truth, double lr) {
  auto leaves = model.params().bind(true);
  nn::Var y = model.forward(leaves, conditions);
  nn::Var loss = nn::lsd_loss(nn::reshape(y, truth.shape()), truth);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw std::runtime_error("non-finite loss");
  nn::backward(loss);
  auto grads = model.params().gradients(leaves);
  model.params().adam_step(grads, lr);
  return value;
}

}  // namespace

NfTrainResult nf_train(const AtfDataset& ds, const NfConfig& config, std::uint64_t seed, const EpochCallback& on_epoch) {
  config.validate();
  const auto train_sources = ds.split.indices(Split::train);
  if (train_sources.empty() || ds.num_targets() == 0) throw std::invalid_argument("nf_train: empty training split");

  NfTrainResult result{NeuralField(config, InputScaling::from_dataset(ds), seed), {}};
  NeuralField& model = result.model;
  Rng rng = Rng::derive(seed, "nf-train");

  const std::size_t N = ds.num_targets(), F = ds.num_bins();
  const std::size_t total_pairs = N * train_sources.size();
  const std::size_t per_epoch = config.pairs_per_epoch == 0 ? total_pairs : std::min(config.pairs_per_epoch, total_pairs);
  std::vector<std::size_t> all_pairs(total_pairs);
  for (std::size_t i = 0; i < total_pairs; ++i) all_pairs[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.schedule.at(epoch);
    std::vector<std::size_t> chosen;
    if (per_epoch == total_pairs) {
      chosen = all_pairs;
      rng.shuffle(chosen);
    } else {
      chosen = rng.sample_without_replacement(total_pairs, per_epoch);
    }
    double weighted = 0.0;
    for (std::size_t begin = 0; begin < chosen.size(); begin += config.batch_pairs) {
      const std::size_t count = std::min(config.batch_pairs, chosen.size() - begin);
      nn::Tensor cond({static_cast<nn::Index>(count * F), kDecoderConditionWidth});
      nn::Tensor truth({static_cast<nn::Index>(count), static_cast<nn::Index>(F)});
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t pair = chosen[begin + b];
        const std::size_t n = pair / train_sources.size();
        const std::size_t l = train_sources[pair % train_sources.size()];
        auto spec = ds.spectrum(n, l);
        for (std::size_t f = 0; f < F; ++f) {
          const auto r = static_cast<nn::Index>(b * F + f);
          model.scaling().fill({cond.data() + r * kDecoderConditionWidth, kDecoderConditionWidth},
                               ds.targets.coords[n], ds.sources.coords[l], ds.frequencies[f]);
          truth[static_cast<nn::Index>(b * F + f)] = spec[f];
        }
      }
      try {
        weighted += nf_step(model, cond, truth, lr) * static_cast<double>(count);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("nf_train diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    EpochRecord record{epoch, lr, weighted / static_cast<double>(chosen.size())};
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record, model.params());
  }
  result.history.best_epoch = config.epochs;
  return result;
}

std::vector<double> nf_adapt_and_predict(const NeuralField& base, const Observations& obs, const Vec3& source,
                                         std::span<const Vec3> targets, std::span<const double> frequencies,
                                         AdaptationTrace* trace, std::size_t epochs_override) {
  const std::size_t M = obs.count(), F = frequencies.size();
  if (M == 0) throw std::invalid_argument("no observations");
  if (obs.values.size() != M * F) throw std::invalid_argument("observation values do not match frequency count");
  const std::size_t epochs = epochs_override == static_cast<std::size_t>(-1) ? base.config().finetune_epochs : epochs_override;

  NeuralField model = base;
  model.params().reset_optimizer();
  const nn::Tensor all_cond = model.conditions(obs.positions, source, frequencies);
  const nn::Tensor all_truth({static_cast<nn::Index>(M), static_cast<nn::Index>(F)}, obs.values);
  const std::size_t batch = model.config().batch_pairs;

  auto observation_loss = [&] {
    nn::Var y = model.forward(model.params().bind(false), all_cond);
    return nn::lsd_loss(nn::reshape(y, all_truth.shape()), all_truth).value()[0];
  };

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    if (trace) trace->losses.push_back(observation_loss());
    for (std::size_t begin = 0; begin < M; begin += batch) {
      const std::size_t count = std::min(batch, M - begin);
      const auto rows = static_cast<nn::Index>(count * F);
      nn::Tensor cond({rows, kDecoderConditionWidth});
      cond.matrix() = all_cond.matrix().middleRows(static_cast<nn::Index>(begin * F), rows);
      nn::Tensor truth({static_cast<nn::Index>(count), static_cast<nn::Index>(F)});
      truth.matrix() = all_truth.matrix().middleRows(static_cast<nn::Index>(begin), static_cast<nn::Index>(count));
      try {
        nf_step(model, cond, truth, model.config().finetune_learning_rate);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("nf fine-tuning diverged at epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
    }
  }
  if (trace) trace->losses.push_back(observation_loss());
  return model.predict(targets, source, frequencies);
}

}  // namespace atfmag
