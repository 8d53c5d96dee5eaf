// SPDX-License-Identifier: Apache-2.0
#include "semlab/numerics/mlp.hpp"

#include <cmath>
#include <random>

namespace semlab::nn {

template <class T>
void init_layers(ParamSet<T>& params, const LayerList& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& layer : spec) {
    if (layer.in == 0 || layer.out == 0)
      throw ConfigError("layer '" + layer.name + "' has a zero dimension");
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor<T> w({layer.out, layer.in});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(dist(rng));
    params.add(layer.name, std::move(w), Tensor<T>({1, layer.out}));
  }
}

template <class T>
typename Graph<T>::Var mlp_forward(Graph<T>& graph, typename Graph<T>::Var x,
                                   const ParamSet<T>& params, const LayerList& spec,
                                   T leaky_slope) {
  auto h = x;
  for (const auto& layer : spec) {
    const std::size_t width = graph.value(h).cols();
    if (width != layer.in)
      throw ConfigError("layer '" + layer.name + "' expects input width " +
                        std::to_string(layer.in) + ", got " + std::to_string(width));
    h = graph.affine(h, graph.bind_layer(layer.name, params.at(layer.name)));
    h = graph.activate(h, layer.activation, leaky_slope);
  }
  return h;
}

template <class T>
Tensor<T> mlp_forward(const Tensor<T>& x, const ParamSet<T>& params, const LayerList& spec,
                      T leaky_slope) {
  Graph<T> graph;
  auto out = mlp_forward(graph, graph.constant(x), params, spec, leaky_slope);
  return graph.value(out);
}

template void init_layers<float>(ParamSet<float>&, const LayerList&, std::uint64_t);
template void init_layers<double>(ParamSet<double>&, const LayerList&, std::uint64_t);
template Graph<float>::Var mlp_forward<float>(Graph<float>&, Graph<float>::Var,
                                              const ParamSet<float>&, const LayerList&, float);
template Graph<double>::Var mlp_forward<double>(Graph<double>&, Graph<double>::Var,
                                                const ParamSet<double>&, const LayerList&,
                                                double);
template Tensor<float> mlp_forward<float>(const Tensor<float>&, const ParamSet<float>&,
                                          const LayerList&, float);
template Tensor<double> mlp_forward<double>(const Tensor<double>&, const ParamSet<double>&,
                                            const LayerList&, double);

}  // namespace semlab::nn
