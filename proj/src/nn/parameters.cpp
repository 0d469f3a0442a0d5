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

#include "atfmag/nn/parameters.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "atfmag/binary_io.hpp"

namespace atfmag::nn {

namespace {
constexpr char kMagic[8] = {'A', 'T', 'F', 'M', 'C', 'K', 'P', 'T'};
}

std::size_t ModelParameters::add(std::string name, Tensor value, bool trainable) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Entry e;
  e.name = std::move(name);
  e.trainable = trainable;
  e.first_moment = Tensor(value.shape(), 0.0);
  e.second_moment = Tensor(value.shape(), 0.0);
  e.value = std::move(value);
  entries_.push_back(std::move(e));
  return entries_.size() - 1;
}

std::optional<std::size_t> ModelParameters::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ModelParameters::index_of(const std::string& name) const {
  auto i = find(name);
  if (!i) throw std::out_of_range("no parameter named " + name);
  return *i;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += static_cast<std::size_t>(e.value.size());
  return n;
}

std::vector<Var> ModelParameters::bind(bool track) const {
  std::vector<Var> leaves;
  leaves.reserve(entries_.size());
  for (const auto& e : entries_)
    leaves.push_back(track && e.trainable ? Var::parameter(e.value) : Var::constant(e.value));
  return leaves;
}

std::vector<Tensor> ModelParameters::gradients(const std::vector<Var>& leaves) const {
  if (leaves.size() != entries_.size()) throw std::invalid_argument("leaf count does not match parameters");
  std::vector<Tensor> out;
  out.reserve(leaves.size());
  for (const auto& v : leaves) out.push_back(v.grad());
  return out;
}

void ModelParameters::adam_step(std::span<const Tensor> gradients, double learning_rate,
                                const AdamOptions& o) {
  if (gradients.size() != entries_.size()) throw std::invalid_argument("gradient count does not match parameters");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!entries_[i].trainable) continue;
    if (gradients[i].size() != entries_[i].value.size())
      throw std::invalid_argument("gradient shape mismatch for " + entries_[i].name);
    if (!gradients[i].all_finite()) throw std::runtime_error("diverged");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    Entry& e = entries_[i];
    if (!e.trainable) continue;
    const double* g = gradients[i].data();
    double* p = e.value.data();
    double* m = e.first_moment.data();
    double* v = e.second_moment.data();
    for (Index k = 0; k < e.value.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

void ModelParameters::reset_optimizer() {
  for (auto& e : entries_) {
    e.first_moment.fill(0.0);
    e.second_moment.fill(0.0);
  }
  step_ = 0;
}

std::uint64_t ModelParameters::hash() const {
  std::uint64_t h = 0;
  for (const auto& e : entries_) {
    h = hash_bytes(e.name.data(), e.name.size(), h);
    h = hash_bytes(e.value.data(), static_cast<std::size_t>(e.value.size()) * sizeof(double), h);
  }
  return h;
}

std::uint64_t ModelParameters::full_hash() const {
  std::uint64_t h = hash();
  for (const auto& e : entries_) {
    h = hash_bytes(e.first_moment.data(), static_cast<std::size_t>(e.first_moment.size()) * sizeof(double), h);
    h = hash_bytes(e.second_moment.data(), static_cast<std::size_t>(e.second_moment.size()) * sizeof(double), h);
  }
  return hash_bytes(&step_, sizeof(step_), h);
}

void ModelParameters::save(std::ostream& out) const {
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    binary::write_string(out, e.name);
    binary::write<std::uint8_t>(out, e.trainable ? 1 : 0);
    binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (Index d : e.value.shape()) binary::write<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  }
  for (const auto& e : entries_) binary::write_array(out, e.value.values());
  binary::write<std::uint64_t>(out, step_);
  for (const auto& e : entries_) {
    binary::write_array(out, e.first_moment.values());
    binary::write_array(out, e.second_moment.values());
  }
}

ModelParameters ModelParameters::load(std::istream& in) {
  ModelParameters p;
  const auto count = binary::read<std::uint32_t>(in);
  if (count > 100000) throw std::runtime_error("corrupt checkpoint: parameter count");
  std::vector<Shape> shapes;
  std::vector<std::pair<std::string, bool>> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = binary::read_string(in);
    bool trainable = binary::read<std::uint8_t>(in) != 0;
    const auto rank = binary::read<std::uint32_t>(in);
    if (rank > 8) throw std::runtime_error("corrupt checkpoint: rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<Index>(binary::read<std::uint64_t>(in)));
    shapes.push_back(shape);
    names.emplace_back(std::move(name), trainable);
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t(shapes[i]);
    binary::read_array(in, t.values());
    p.add(names[i].first, std::move(t), names[i].second);
  }
  p.step_ = binary::read<std::uint64_t>(in);
  for (auto& e : p.entries_) {
    binary::read_array(in, e.first_moment.values());
    binary::read_array(in, e.second_moment.values());
  }
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params, const std::string& metadata) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  binary::write<std::uint32_t>(out, kCheckpointFormatVersion);
  binary::write<std::uint64_t>(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  params.save(out);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path.string() + ": not a checkpoint file");
  const auto version = binary::read<std::uint32_t>(in);
  if (version != kCheckpointFormatVersion)
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto meta_size = binary::read<std::uint64_t>(in);
  if (meta_size > (1ull << 28)) throw std::runtime_error(path.string() + ": corrupt metadata length");
  Checkpoint ck;
  ck.metadata.resize(meta_size);
  in.read(ck.metadata.data(), static_cast<std::streamsize>(meta_size));
  if (!in) throw std::runtime_error(path.string() + ": truncated metadata");
  try {
    ck.params = ModelParameters::load(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return ck;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = stddev * rng.normal();
  return t;
}

}  // namespace atfmag::nn
