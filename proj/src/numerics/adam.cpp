// SPDX-License-Identifier: Apache-2.0
#include "semlab/numerics/adam.hpp"

#include <cmath>

#include "semlab/simd/kernels.hpp"

namespace semlab::nn {

template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state) {
  params.require_same_layout(grads);
  params.require_same_layout(state.first_moment);
  params.require_same_layout(state.second_moment);

  state.step += 1;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const simd::AdamCoeffs<T> coeffs{
      static_cast<T>(cfg.learning_rate),
      static_cast<T>(cfg.beta1),
      static_cast<T>(cfg.beta2),
      static_cast<T>(cfg.epsilon),
      static_cast<T>(1.0 - std::pow(cfg.beta1, t)),
      static_cast<T>(1.0 - std::pow(cfg.beta2, t)),
  };
  const auto& k = simd::kernels<T>();
  auto g = grads.begin();
  auto m = state.first_moment.begin();
  auto v = state.second_moment.begin();
  for (auto p = params.begin(); p != params.end(); ++p, ++g, ++m, ++v) {
    k.adam_update(p->second.weights.size(), coeffs, p->second.weights.data(),
                  g->second.weights.data(), m->second.weights.data(),
                  v->second.weights.data());
    k.adam_update(p->second.biases.size(), coeffs, p->second.biases.data(),
                  g->second.biases.data(), m->second.biases.data(),
                  v->second.biases.data());
  }
}

template void adam_step<float>(ParamSet<float>&, const ParamSet<float>&, AdamState<float>&);
template void adam_step<double>(ParamSet<double>&, const ParamSet<double>&,
                                AdamState<double>&);

}  // namespace semlab::nn
