// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semlab/numerics/graph.hpp"

namespace semlab::nn {

inline constexpr double kDefaultLeakySlope = 0.01;

struct LayerSpec {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kIdentity;
};

using LayerList = std::vector<LayerSpec>;

/// Adds every layer of `spec` to `params` with weights uniform in
/// +-sqrt(6 / (fan_in + fan_out)) and zero biases.
template <class T>
void init_layers(ParamSet<T>& params, const LayerList& spec, std::uint64_t seed);

/// Chains affine + activation for each layer. Throws ConfigError naming the
/// first layer whose input width does not match.
template <class T>
typename Graph<T>::Var mlp_forward(Graph<T>& graph, typename Graph<T>::Var x,
                                   const ParamSet<T>& params, const LayerList& spec,
                                   T leaky_slope = T(kDefaultLeakySlope));

/// Forward pass without keeping the graph.
template <class T>
Tensor<T> mlp_forward(const Tensor<T>& x, const ParamSet<T>& params, const LayerList& spec,
                      T leaky_slope = T(kDefaultLeakySlope));

}  // namespace semlab::nn
