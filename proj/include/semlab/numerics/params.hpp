// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "semlab/numerics/tensor.hpp"

namespace semlab::nn {

/// One fully connected layer: weights [out x in], biases [1 x out].
template <class T>
struct LayerParams {
  Tensor<T> weights;
  Tensor<T> biases;
};

/// Named layer parameters in insertion order.
template <class T>
class ParamSet {
 public:
  void add(const std::string& name, Tensor<T> weights, Tensor<T> biases) {
    if (index_.contains(name))
      throw ConfigError("duplicate parameter layer '" + name + "'");
    index_.emplace(name, layers_.size());
    layers_.emplace_back(name, LayerParams<T>{std::move(weights), std::move(biases)});
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  LayerParams<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter layer '" + name + "'");
    return layers_[it->second].second;
  }
  const LayerParams<T>& at(const std::string& name) const {
    return const_cast<ParamSet*>(this)->at(name);
  }

  std::size_t layer_count() const noexcept { return layers_.size(); }
  auto begin() noexcept { return layers_.begin(); }
  auto end() noexcept { return layers_.end(); }
  auto begin() const noexcept { return layers_.begin(); }
  auto end() const noexcept { return layers_.end(); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [name, layer] : layers_) n += layer.weights.size() + layer.biases.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& [name, layer] : layers_)
      out.add(name, Tensor<T>(layer.weights.shape()), Tensor<T>(layer.biases.shape()));
    return out;
  }

  void set_zero() {
    for (auto& [name, layer] : layers_) {
      layer.weights.fill(T(0));
      layer.biases.fill(T(0));
    }
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [name, layer] : layers_)
      out.add(name, layer.weights.template cast<U>(), layer.biases.template cast<U>());
    return out;
  }

  /// Throws ConfigError naming the first layer whose shapes differ.
  void require_same_layout(const ParamSet& other) const {
    if (other.layers_.size() != layers_.size())
      throw ConfigError("parameter sets have different layer counts");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& [name, a] = layers_[i];
      const auto& [other_name, b] = other.layers_[i];
      if (name != other_name || a.weights.shape() != b.weights.shape() ||
          a.biases.shape() != b.biases.shape())
        throw ConfigError("parameter layout mismatch at layer '" + name + "'");
    }
  }

 private:
  std::vector<std::pair<std::string, LayerParams<T>>> layers_;
  std::map<std::string, std::size_t> index_;
};

/// Writes manifest.json plus one little-endian f32 blob per tensor into `dir`.
/// `metadata` is stored verbatim under the manifest's "metadata" key (JSON text).
void save_checkpoint(const ParamSet<float>& params, const std::filesystem::path& dir,
                     const std::string& metadata_json = "{}");

struct LoadedCheckpoint {
  ParamSet<float> params;
  std::string metadata_json;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace semlab::nn
