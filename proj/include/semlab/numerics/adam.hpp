// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "semlab/numerics/params.hpp"

namespace semlab::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one ParamSet. Owned by the training loop.
template <class T>
struct AdamState {
  AdamConfig config;
  ParamSet<T> first_moment;
  ParamSet<T> second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const ParamSet<T>& params, AdamConfig config = {}) {
    return AdamState{config, params.zeros_like(), params.zeros_like(), 0};
  }
};

/// One bias-corrected Adam update of `params` in place.
template <class T>
void adam_step(ParamSet<T>& params, const ParamSet<T>& grads, AdamState<T>& state);

}  // namespace semlab::nn
