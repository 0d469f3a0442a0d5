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

#include "atfmag/autoencoder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "atfmag/json_io.hpp"
#include "atfmag/nn/exact_sum.hpp"
#include "atfmag/nn/ops.hpp"
#include "atfmag/parallel.hpp"
#include "atfmag/rng.hpp"

namespace atfmag {

namespace {

const char* prefix(AeNetwork which) { return which == AeNetwork::encoder ? "enc" : "dec"; }

std::string pname(AeNetwork which, const std::string& rest) { return std::string(prefix(which)) + "." + rest; }

const nn::Var& leaf(const nn::ModelParameters& params, const std::vector<nn::Var>& leaves, const std::string& name) {
  return leaves.at(params.index_of(name));
}

}  // namespace

nn::Var GeneratedLayer::weight() const { return nn::slice_columns(packed, 0, out * in); }
nn::Var GeneratedLayer::bias() const { return nn::slice_columns(packed, out * in, out); }

AeConfig AeConfig::desk() {
  AeConfig c;
  c.latent_dim = 16;
  c.encoder_hidden = {32};
  c.decoder_hidden = {32};
  c.generator_width = 64;
  c.generator_depth = 2;
  c.ffm = {32, 4.0};
  c.epochs = 300;
  c.schedule = {{170, 255}, {1e-3, 1e-4, 1e-5}};
  c.training_counts = {5, 10, 20, 50, 100};
  c.sources_per_step = 4;
  c.targets_per_step = 32;
  c.validation_targets = 256;
  return c;
}

double AeConfig::effective_count_max() const {
  if (count_max > 0.0) return count_max;
  return static_cast<double>(*std::max_element(training_counts.begin(), training_counts.end()));
}

void AeConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("ae: latent_dim must be >= 1");
  if (generator_width < 1 || generator_depth < 1) throw std::invalid_argument("ae: generator width and depth must be >= 1");
  for (auto w : encoder_hidden)
    if (w < 1) throw std::invalid_argument("ae: encoder hidden widths must be >= 1");
  for (auto w : decoder_hidden)
    if (w < 1) throw std::invalid_argument("ae: decoder hidden widths must be >= 1");
  if (ffm.features < 1) throw std::invalid_argument("ae: need at least one Fourier feature");
  if (training_counts.empty()) throw std::invalid_argument("ae: training_counts must not be empty");
  for (auto m : training_counts)
    if (m < 1) throw std::invalid_argument("ae: training counts must be >= 1");
  if (sources_per_step < 1) throw std::invalid_argument("ae: sources_per_step must be >= 1");
  if (validation_count < 1) throw std::invalid_argument("ae: validation_count must be >= 1");
  if (count_max < 0.0) throw std::invalid_argument("ae: count_max must be >= 0");
  schedule.validate();
}

void to_json(nlohmann::json& j, const AeConfig& c) {
  j = nlohmann::json{{"latent_dim", c.latent_dim},
                     {"encoder_hidden", c.encoder_hidden},
                     {"decoder_hidden", c.decoder_hidden},
                     {"generator_width", c.generator_width},
                     {"generator_depth", c.generator_depth},
                     {"ffm", c.ffm},
                     {"epochs", c.epochs},
                     {"schedule", c.schedule},
                     {"training_counts", c.training_counts},
                     {"count_max", c.count_max},
                     {"sources_per_step", c.sources_per_step},
                     {"targets_per_step", c.targets_per_step},
                     {"standardize_input", c.standardize_input},
                     {"validation_count", c.validation_count},
                     {"validation_targets", c.validation_targets}};
}

void from_json(const nlohmann::json& j, AeConfig& c) {
  read_optional(j, "latent_dim", c.latent_dim);
  read_optional(j, "encoder_hidden", c.encoder_hidden);
  read_optional(j, "decoder_hidden", c.decoder_hidden);
  read_optional(j, "generator_width", c.generator_width);
  read_optional(j, "generator_depth", c.generator_depth);
  read_optional(j, "ffm", c.ffm);
  read_optional(j, "epochs", c.epochs);
  read_optional(j, "schedule", c.schedule);
  read_optional(j, "training_counts", c.training_counts);
  read_optional(j, "count_max", c.count_max);
  read_optional(j, "sources_per_step", c.sources_per_step);
  read_optional(j, "targets_per_step", c.targets_per_step);
  read_optional(j, "standardize_input", c.standardize_input);
  read_optional(j, "validation_count", c.validation_count);
  read_optional(j, "validation_targets", c.validation_targets);
}

void to_json(nlohmann::json& j, const InputStandardization& s) {
  j = nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}};
}

void from_json(const nlohmann::json& j, InputStandardization& s) {
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("stddev").get<double>();
}

InputStandardization training_statistics(const AtfDataset& ds) {
  std::vector<double> values;
  for (std::size_t n = 0; n < ds.num_targets(); ++n)
    for (std::size_t l : ds.split.indices(Split::train)) {
      auto s = ds.spectrum(n, l);
      values.insert(values.end(), s.begin(), s.end());
    }
  if (values.empty()) throw std::invalid_argument("training split is empty");
  const double count = static_cast<double>(values.size());
  const double mean = nn::exact_sum(values) / count;
  for (double& v : values) v = (v - mean) * (v - mean);
  const double var = nn::exact_sum(values) / count;
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

ConditionedAutoencoder::ConditionedAutoencoder(const AeConfig& config, const InputScaling& scaling,
                                               const InputStandardization& standardization, std::uint64_t seed)
    : config_(config), scaling_(scaling), standardization_(standardization) {
  config_.validate();
  if (!(standardization_.stddev > 0.0)) throw std::invalid_argument("ae: standardization stddev must be > 0");
  Rng rng = Rng::derive(seed, "ae-init");
  const auto K = static_cast<nn::Index>(config_.ffm.features);
  const auto W = static_cast<nn::Index>(config_.generator_width);
  auto add_linear = [&](const std::string& name, nn::Index out, nn::Index in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    params_.add(name + ".weight", nn::uniform_tensor({out, in}, bound, rng));
    params_.add(name + ".bias", nn::uniform_tensor({out}, bound, rng));
  };
  auto add_norm = [&](const std::string& name, nn::Index dim) {
    params_.add(name + ".gain", nn::Tensor({dim}, 1.0));
    params_.add(name + ".shift", nn::Tensor({dim}, 0.0));
  };
  for (AeNetwork which : {AeNetwork::encoder, AeNetwork::decoder}) {
    const nn::Index cond_width = which == AeNetwork::encoder ? kEncoderConditionWidth : kDecoderConditionWidth;
    params_.add(pname(which, "ffm"), nn::normal_tensor({K, cond_width}, config_.ffm.scale, rng), false);
    nn::Index in = 2 * K;
    for (std::size_t i = 0; i < config_.generator_depth; ++i) {
      add_linear(pname(which, "gen.fc" + std::to_string(i)), W, in);
      add_norm(pname(which, "gen.ln" + std::to_string(i)), W);
      in = W;
    }
    const auto dims = layer_dims(which);
    for (std::size_t j = 0; j < dims.size(); ++j) {
      const auto [lin, lout] = dims[j];
      add_linear(pname(which, "gen.head" + std::to_string(j)), lout * lin + lout, W);
      if (j + 1 < dims.size()) add_norm(pname(which, "ln" + std::to_string(j)), lout);
    }
  }
}

std::vector<std::pair<nn::Index, nn::Index>> ConditionedAutoencoder::layer_dims(AeNetwork which) const {
  std::vector<std::size_t> widths;
  nn::Index in = 1;
  if (which == AeNetwork::encoder) {
    widths = config_.encoder_hidden;
    widths.push_back(config_.latent_dim);
  } else {
    widths = config_.decoder_hidden;
    widths.push_back(1);
    in = static_cast<nn::Index>(config_.latent_dim);
  }
  std::vector<std::pair<nn::Index, nn::Index>> dims;
  for (std::size_t w : widths) {
    dims.emplace_back(in, static_cast<nn::Index>(w));
    in = static_cast<nn::Index>(w);
  }
  return dims;
}

nn::Tensor ConditionedAutoencoder::encoder_conditions(std::span<const Vec3> positions, const Vec3& source,
                                                      std::span<const double> frequencies, double count) const {
  const auto F = frequencies.size();
  nn::Tensor rows({static_cast<nn::Index>(positions.size() * F), kEncoderConditionWidth});
  for (std::size_t p = 0; p < positions.size(); ++p)
    for (std::size_t f = 0; f < F; ++f)
      scaling_.fill({rows.data() + (p * F + f) * kEncoderConditionWidth, kEncoderConditionWidth}, positions[p], source,
                    frequencies[f], count);
  return rows;
}

nn::Tensor ConditionedAutoencoder::decoder_conditions(std::span<const Vec3> positions, const Vec3& source,
                                                      std::span<const double> frequencies) const {
  const auto F = frequencies.size();
  nn::Tensor rows({static_cast<nn::Index>(positions.size() * F), kDecoderConditionWidth});
  for (std::size_t p = 0; p < positions.size(); ++p)
    for (std::size_t f = 0; f < F; ++f)
      scaling_.fill({rows.data() + (p * F + f) * kDecoderConditionWidth, kDecoderConditionWidth}, positions[p], source,
                    frequencies[f]);
  return rows;
}

nn::Var ConditionedAutoencoder::generator_trunk(const std::vector<nn::Var>& leaves, AeNetwork which,
                                                const nn::Tensor& conditions) const {
  const nn::Index width = which == AeNetwork::encoder ? kEncoderConditionWidth : kDecoderConditionWidth;
  if (conditions.cols() != width)
    throw std::invalid_argument(std::string("generate_weights: ") + prefix(which) + " conditions need " +
                                std::to_string(width) + " columns");
  return generator_mlp(
      leaves, which,
      nn::fourier_features(nn::Var::constant(conditions), params_.value(params_.index_of(pname(which, "ffm")))));
}

nn::Var ConditionedAutoencoder::generator_mlp(const std::vector<nn::Var>& leaves, AeNetwork which, nn::Var h) const {
  for (std::size_t i = 0; i < config_.generator_depth; ++i) {
    const std::string fc = pname(which, "gen.fc" + std::to_string(i));
    const std::string ln = pname(which, "gen.ln" + std::to_string(i));
    h = nn::linear(h, leaf(params_, leaves, fc + ".weight"), leaf(params_, leaves, fc + ".bias"));
    h = nn::mish(nn::layer_norm(h, leaf(params_, leaves, ln + ".gain"), leaf(params_, leaves, ln + ".shift")));
  }
  return h;
}

std::vector<GeneratedLayer> ConditionedAutoencoder::generate_weights(const std::vector<nn::Var>& leaves, AeNetwork which,
                                                                     const nn::Tensor& conditions) const {
  const nn::Var h = generator_trunk(leaves, which, conditions);
  std::vector<GeneratedLayer> layers;
  const auto dims = layer_dims(which);
  for (std::size_t j = 0; j < dims.size(); ++j) {
    const auto [in, out] = dims[j];
    const std::string head = pname(which, "gen.head" + std::to_string(j));
    nn::Var g = nn::linear(h, leaf(params_, leaves, head + ".weight"), leaf(params_, leaves, head + ".bias"));
    layers.push_back({g, in, out});
  }
  return layers;
}

nn::Var ConditionedAutoencoder::target_network(const std::vector<nn::Var>& leaves, AeNetwork which, nn::Var x,
                                               const std::vector<GeneratedLayer>& layers) const {
  for (std::size_t j = 0; j < layers.size(); ++j) {
    x = nn::hyper_linear_packed(x, layers[j].packed, layers[j].out);
    if (j + 1 < layers.size()) {
      const std::string ln = pname(which, "ln" + std::to_string(j));
      x = nn::mish(nn::layer_norm(x, leaf(params_, leaves, ln + ".gain"), leaf(params_, leaves, ln + ".shift")));
    }
  }
  return x;
}

nn::Var ConditionedAutoencoder::encode(const std::vector<nn::Var>& leaves, const nn::Tensor& values,
                                       const nn::Tensor& conditions) const {
  if (values.size() != conditions.rows()) throw std::invalid_argument("encode: one value per condition row required");
  nn::Tensor input({values.size(), 1});
  for (nn::Index r = 0; r < values.size(); ++r)
    input[r] = config_.standardize_input ? (values[r] - standardization_.mean) / standardization_.stddev : values[r];
  return target_network(leaves, AeNetwork::encoder, nn::Var::constant(std::move(input)),
                        generate_weights(leaves, AeNetwork::encoder, conditions));
}

nn::Var ConditionedAutoencoder::decode(const std::vector<nn::Var>& leaves, const nn::Var& prototypes,
                                       const nn::Tensor& conditions) const {
  if (prototypes.value().rows() != conditions.rows() ||
      prototypes.value().cols() != static_cast<nn::Index>(config_.latent_dim))
    throw std::invalid_argument("decode: prototypes must be [rows, latent_dim] matching the conditions");
  return target_network(leaves, AeNetwork::decoder, prototypes, generate_weights(leaves, AeNetwork::decoder, conditions));
}

nn::Tensor ConditionedAutoencoder::decode_shared(const nn::Tensor& prototypes, std::span<const Vec3> positions,
                                                 const Vec3& source, std::span<const double> frequencies) const {
  const auto F = static_cast<nn::Index>(frequencies.size()), T = static_cast<nn::Index>(positions.size());
  const auto D = static_cast<nn::Index>(config_.latent_dim), R = T * F;
  if (prototypes.rank() != 2 || prototypes.rows() != F || prototypes.cols() != D)
    throw std::invalid_argument("decode_shared: prototypes must be [F, latent_dim]");
  const auto leaves = params_.bind(false);

  // phase = a(position, source) + b(frequency); cos and sin by the sum rule
  const nn::Tensor& ffm = params_.value(params_.index_of("dec.ffm"));
  const nn::Index K = ffm.dim(0);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  nn::RowMatrix pos_cos(T, K), pos_sin(T, K), freq_cos(F, K), freq_sin(F, K);
  std::array<double, kDecoderConditionWidth> row{};
  for (nn::Index t = 0; t < T; ++t) {
    scaling_.fill(row, positions[static_cast<std::size_t>(t)], source, 0.0);
    for (nn::Index k = 0; k < K; ++k) {
      double a = 0.0;
      for (nn::Index d = 0; d + 1 < kDecoderConditionWidth; ++d) a += ffm[k * kDecoderConditionWidth + d] * row[d];
      pos_cos(t, k) = std::cos(kTwoPi * a);
      pos_sin(t, k) = std::sin(kTwoPi * a);
    }
  }
  for (nn::Index f = 0; f < F; ++f) {
    scaling_.fill(row, Vec3{}, Vec3{}, frequencies[static_cast<std::size_t>(f)]);
    const double v = row[kDecoderConditionWidth - 1];
    for (nn::Index k = 0; k < K; ++k) {
      const double b = kTwoPi * ffm[k * kDecoderConditionWidth + kDecoderConditionWidth - 1] * v;
      freq_cos(f, k) = std::cos(b);
      freq_sin(f, k) = std::sin(b);
    }
  }
  nn::Tensor features({R, 2 * K});
  for (nn::Index t = 0; t < T; ++t)
    for (nn::Index f = 0; f < F; ++f) {
      double* out = features.data() + (t * F + f) * 2 * K;
      for (nn::Index k = 0; k < K; ++k) {
        out[k] = pos_cos(t, k) * freq_cos(f, k) - pos_sin(t, k) * freq_sin(f, k);
        out[K + k] = pos_sin(t, k) * freq_cos(f, k) + pos_cos(t, k) * freq_sin(f, k);
      }
    }
  const nn::Var h = generator_mlp(leaves, AeNetwork::decoder, nn::Var::constant(std::move(features)));
  const nn::Tensor& hv = h.value();
  const nn::Index G = hv.cols();
  const auto dims = layer_dims(AeNetwork::decoder);
  const auto [in, out] = dims[0];
  const auto W = params_.value(params_.index_of("dec.gen.head0.weight")).matrix();  // [out*in+out, G]
  const nn::Tensor& c = params_.value(params_.index_of("dec.gen.head0.bias"));

  // Bt[k, o] and b[o] per frequency; rows then accumulate over k in a fixed
  // order so the result does not depend on how targets are chunked
  nn::Tensor x({R, out});
  nn::RowMatrix Bt(G, out);
  Eigen::RowVectorXd b(out);
  for (nn::Index f = 0; f < F; ++f) {
    const double* p = prototypes.data() + f * D;
    for (nn::Index o = 0; o < out; ++o) {
      Bt.col(o) = W.row(out * in + o).transpose();
      b(o) = c[out * in + o];
      for (nn::Index i = 0; i < in; ++i) {
        Bt.col(o) += p[i] * W.row(o * in + i).transpose();
        b(o) += p[i] * c[o * in + i];
      }
    }
    for (nn::Index t = 0; t < T; ++t) {
      const double* hr = hv.data() + (t * F + f) * G;
      Eigen::Map<Eigen::RowVectorXd> xr(x.data() + (t * F + f) * out, out);
      xr = b;
      for (nn::Index k = 0; k < G; ++k) xr.noalias() += hr[k] * Bt.row(k);
    }
  }

  nn::Var y = nn::Var::constant(std::move(x));
  for (std::size_t j = 1; j < dims.size(); ++j) {
    const std::string ln = pname(AeNetwork::decoder, "ln" + std::to_string(j - 1));
    const std::string head = pname(AeNetwork::decoder, "gen.head" + std::to_string(j));
    y = nn::mish(nn::layer_norm(y, leaf(params_, leaves, ln + ".gain"), leaf(params_, leaves, ln + ".shift")));
    y = nn::hyper_linear_packed(
        y, nn::linear(h, leaf(params_, leaves, head + ".weight"), leaf(params_, leaves, head + ".bias")), dims[j].second);
  }
  return y.value();
}

nn::Var ConditionedAutoencoder::forward(const std::vector<nn::Var>& leaves, const Observations& obs, const Vec3& source,
                                        std::span<const Vec3> targets, std::span<const double> frequencies) const {
  const std::size_t M = obs.count(), F = frequencies.size(), T = targets.size();
  if (M == 0) throw std::invalid_argument("no observations");
  if (obs.values.size() != M * F) throw std::invalid_argument("observation values do not match frequency count");
  const nn::Tensor values({static_cast<nn::Index>(M * F), 1}, obs.values);
  nn::Var z = encode(leaves, values, encoder_conditions(obs.positions, source, frequencies, static_cast<double>(M)));
  std::vector<nn::Index> group(M * F);
  for (std::size_t r = 0; r < group.size(); ++r) group[r] = static_cast<nn::Index>(r % F);
  nn::Var proto = nn::group_mean(z, group, static_cast<nn::Index>(F));
  std::vector<nn::Index> gather(T * F);
  for (std::size_t r = 0; r < gather.size(); ++r) gather[r] = static_cast<nn::Index>(r % F);
  nn::Var y = decode(leaves, nn::gather_rows(proto, gather), decoder_conditions(targets, source, frequencies));
  return nn::reshape(y, {static_cast<nn::Index>(T), static_cast<nn::Index>(F)});
}

void ConditionedAutoencoder::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta{{"model", "conditioned_autoencoder"},
                      {"config", config_},
                      {"scaling", scaling_},
                      {"standardization", standardization_},
                      {"extra", extra}};
  nn::save_checkpoint(path, params_, meta.dump());
}

ConditionedAutoencoder ConditionedAutoencoder::load(const std::filesystem::path& path) {
  auto ck = nn::load_checkpoint(path);
  auto meta = nlohmann::json::parse(ck.metadata);
  if (meta.value("model", "") != "conditioned_autoencoder")
    throw std::runtime_error(path.string() + ": not an autoencoder checkpoint");
  ConditionedAutoencoder ae;
  ae.config_ = meta.at("config").get<AeConfig>();
  ae.scaling_ = meta.at("scaling").get<InputScaling>();
  ae.standardization_ = meta.at("standardization").get<InputStandardization>();
  // layout check against a freshly built model of the same config
  ConditionedAutoencoder reference(ae.config_, ae.scaling_, ae.standardization_, 0);
  if (reference.params_.size() != ck.params.size())
    throw std::runtime_error(path.string() + ": parameter layout does not match config");
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    if (reference.params_.entry(i).name != ck.params.entry(i).name ||
        reference.params_.value(i).shape() != ck.params.value(i).shape())
      throw std::runtime_error(path.string() + ": parameter " + ck.params.entry(i).name + " does not match config");
  ae.params_ = std::move(ck.params);
  return ae;
}

nn::Tensor aggregate(const nn::Tensor& latents) {
  if (latents.empty() || latents.rows() == 0) throw std::invalid_argument("no observations");
  const nn::Index M = latents.rows(), D = latents.cols();
  nn::Tensor out({D});
  std::vector<double> column(static_cast<std::size_t>(M));
  for (nn::Index d = 0; d < D; ++d) {
    for (nn::Index m = 0; m < M; ++m) column[static_cast<std::size_t>(m)] = latents[m * D + d];
    out[d] = nn::exact_sum(column) / static_cast<double>(M);
  }
  return out;
}

nn::Tensor ae_prototypes(const ConditionedAutoencoder& model, const Observations& obs, const Vec3& source,
                         std::span<const double> frequencies, const AePredictOptions& options) {
  const std::size_t M = obs.count(), F = frequencies.size();
  const auto D = static_cast<nn::Index>(model.config().latent_dim);
  if (M == 0) throw std::invalid_argument("no observations");
  if (obs.values.size() != M * F) throw std::invalid_argument("observation values do not match frequency count");
  const double count = options.count_override > 0.0 ? options.count_override : static_cast<double>(M);
  const auto leaves = model.params().bind(false);

  // Each observation is its own F-row batch, so its latents do not depend on
  // where it sits in the list.
  std::vector<nn::Tensor> latents(M);
  parallel_for(M, options.workers, [&](std::size_t m) {
    const nn::Tensor values({static_cast<nn::Index>(F), 1},
                            std::vector<double>(obs.values.begin() + static_cast<std::ptrdiff_t>(m * F),
                                                obs.values.begin() + static_cast<std::ptrdiff_t>((m + 1) * F)));
    latents[m] = model.encode(leaves, values,
                              model.encoder_conditions(std::span<const Vec3>(&obs.positions[m], 1), source, frequencies, count))
                     .value();
  });

  nn::Tensor prototypes({static_cast<nn::Index>(F), D});
  nn::Tensor per_frequency({static_cast<nn::Index>(M), D});
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t m = 0; m < M; ++m)
      for (nn::Index d = 0; d < D; ++d)
        per_frequency[static_cast<nn::Index>(m) * D + d] = latents[m][static_cast<nn::Index>(f) * D + d];
    const nn::Tensor mean = aggregate(per_frequency);
    for (nn::Index d = 0; d < D; ++d) prototypes[static_cast<nn::Index>(f) * D + d] = mean[d];
  }
  return prototypes;
}

std::vector<double> ae_decode(const ConditionedAutoencoder& model, const nn::Tensor& prototypes, const Vec3& source,
                              std::span<const Vec3> targets, std::span<const double> frequencies,
                              const AePredictOptions& options) {
  const std::size_t F = frequencies.size(), T = targets.size();
  const auto D = static_cast<nn::Index>(model.config().latent_dim);
  if (prototypes.rows() != static_cast<nn::Index>(F) || prototypes.cols() != D)
    throw std::invalid_argument("ae_decode: prototypes must be [F, latent_dim]");
  const std::size_t per_chunk = std::max<std::size_t>(1, options.chunk_rows / std::max<std::size_t>(F, 1));
  const std::size_t chunks = (T + per_chunk - 1) / per_chunk;
  std::vector<double> out(T * F);
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    const std::size_t begin = c * per_chunk, count = std::min(per_chunk, T - begin);
    const nn::Tensor y = model.decode_shared(prototypes, targets.subspan(begin, count), source, frequencies);
    std::copy(y.values().begin(), y.values().end(), out.begin() + static_cast<std::ptrdiff_t>(begin * F));
  });
  return out;
}

std::vector<double> ae_predict(const ConditionedAutoencoder& model, const Observations& obs, const Vec3& source,
                               std::span<const Vec3> targets, std::span<const double> frequencies,
                               const AePredictOptions& options) {
  return ae_decode(model, ae_prototypes(model, obs, source, frequencies, options), source, targets, frequencies, options);
}

namespace {

double mean_lsd(std::span<const double> estimate, const AtfDataset& ds, std::span<const std::size_t> targets,
                std::size_t source) {
  const std::size_t F = ds.num_bins();
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto truth = ds.spectrum(targets[t], source);
    double acc = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const double d = estimate[t * F + f] - truth[f];
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(F));
  }
  return total / static_cast<double>(targets.size());
}

std::vector<std::size_t> validation_target_indices(const AeConfig& config, std::size_t N, std::uint64_t seed) {
  std::vector<std::size_t> idx;
  if (config.validation_targets == 0 || config.validation_targets >= N) {
    idx.resize(N);
    for (std::size_t n = 0; n < N; ++n) idx[n] = n;
  } else {
    Rng rng = Rng::derive(seed, "ae-validation-targets");
    idx = rng.sample_without_replacement(N, config.validation_targets);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace

double ae_validation_loss(const ConditionedAutoencoder& model, const AtfDataset& ds, std::uint64_t seed) {
  const auto sources = ds.split.indices(Split::validation);
  if (sources.empty()) throw std::invalid_argument("validation split is empty");
  const std::size_t N = ds.num_targets();
  const std::size_t M = std::min(model.config().validation_count, N);
  const auto target_idx = validation_target_indices(model.config(), N, seed);
  std::vector<Vec3> targets;
  for (std::size_t n : target_idx) targets.push_back(ds.targets.coords[n]);
  double total = 0.0;
  for (std::size_t l : sources) {
    Rng rng = Rng::derive(seed, "ae-validation", l);
    const auto meas = rng.sample_without_replacement(N, M);
    const auto obs = observe(ds, l, meas);
    const auto est = ae_predict(model, obs, ds.sources.coords[l], targets, ds.frequencies);
    total += mean_lsd(est, ds, target_idx, l);
  }
  return total / static_cast<double>(sources.size());
}

AeTrainResult ae_train(const AtfDataset& ds, const AeConfig& config, std::uint64_t seed, const EpochCallback& on_epoch) {
  config.validate();
  const auto train_sources = ds.split.indices(Split::train);
  if (train_sources.empty() || ds.num_targets() == 0) throw std::invalid_argument("ae_train: empty training split");
  const std::size_t N = ds.num_targets(), F = ds.num_bins();
  for (std::size_t m : config.training_counts)
    if (m > N) throw std::invalid_argument("ae_train: training count " + std::to_string(m) + " exceeds target count");

  const InputStandardization stats = config.standardize_input ? training_statistics(ds) : InputStandardization{};
  AeTrainResult result{
      ConditionedAutoencoder(config, InputScaling::from_dataset(ds, config.effective_count_max()), stats, seed), {}};
  ConditionedAutoencoder& model = result.model;
  const bool validate = !ds.split.indices(Split::validation).empty();
  nn::ModelParameters best = model.params();
  Rng rng = Rng::derive(seed, "ae-train");

  std::vector<std::size_t> all_targets(N);
  for (std::size_t n = 0; n < N; ++n) all_targets[n] = n;

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.schedule.at(epoch);
    auto order = train_sources;
    rng.shuffle(order);
    double loss_total = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.sources_per_step) {
      const std::size_t count = std::min(config.sources_per_step, order.size() - begin);
      ++step;
      auto leaves = model.params().bind(true);
      nn::Var loss;
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t l = order[begin + k];
        const std::size_t M = config.training_counts[rng.index(config.training_counts.size())];
        const auto meas = rng.sample_without_replacement(N, M);
        const auto tidx = config.targets_per_step == 0 || config.targets_per_step >= N
                              ? all_targets
                              : rng.sample_without_replacement(N, config.targets_per_step);
        std::vector<Vec3> targets;
        nn::Tensor truth({static_cast<nn::Index>(tidx.size()), static_cast<nn::Index>(F)});
        for (std::size_t t = 0; t < tidx.size(); ++t) {
          targets.push_back(ds.targets.coords[tidx[t]]);
          auto s = ds.spectrum(tidx[t], l);
          for (std::size_t f = 0; f < F; ++f) truth[static_cast<nn::Index>(t * F + f)] = s[f];
        }
        nn::Var term;
        try {
          term = nn::lsd_loss(model.forward(leaves, observe(ds, l, meas), ds.sources.coords[l], targets, ds.frequencies),
                              truth);
        } catch (const std::invalid_argument& e) {
          // exact_sum rejects non-finite latents
          throw std::runtime_error("ae_train: " + std::string(e.what()) + " at step " + std::to_string(step) +
                                   " (epoch " + std::to_string(epoch) + ")");
        }
        loss = loss.defined() ? nn::add(loss, term) : term;
      }
      loss = nn::scale(loss, 1.0 / static_cast<double>(count));
      const double value = loss.value()[0];
      if (!std::isfinite(value))
        throw std::runtime_error("ae_train: non-finite loss at step " + std::to_string(step) + " (epoch " +
                                 std::to_string(epoch) + ")");
      nn::backward(loss);
      try {
        model.params().adam_step(model.params().gradients(leaves), lr);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("ae_train: " + std::string(e.what()) + " at step " + std::to_string(step) + " (epoch " +
                                 std::to_string(epoch) + ")");
      }
      loss_total += value;
      ++steps;
    }
    EpochRecord record{epoch, lr, loss_total / static_cast<double>(steps)};
    if (validate) {
      try {
        record.validation_loss = ae_validation_loss(model, ds, seed);
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error("ae_train: " + std::string(e.what()) + " in validation after step " +
                                 std::to_string(step) + " (epoch " + std::to_string(epoch) + ")");
      }
      if (record.validation_loss < result.history.best_validation_loss) {
        result.history.best_validation_loss = record.validation_loss;
        result.history.best_epoch = epoch;
        best = model.params();
      }
    } else {
      result.history.best_epoch = epoch;
      best = model.params();
    }
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record, model.params());
  }
  model.params() = std::move(best);
  return result;
}

}  // namespace atfmag
