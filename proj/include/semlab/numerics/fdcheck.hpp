// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "semlab/numerics/params.hpp"

namespace semlab::nn {

/// Evaluates the loss at `params`; when `grads` is non-null it also receives
/// the analytic gradient (same layout, pre-zeroed by the caller).
using LossFn = std::function<double(const ParamSet<double>& params, ParamSet<double>* grads)>;

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  std::size_t probes_executed = 0;
  std::string worst_coordinate;  // "layer.weights[i]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central differences on `probes` randomly chosen coordinates. Relative
/// error per coordinate is |analytic - numeric| / max(1e-12, |numeric|).
FiniteDiffReport finite_diff_check(const LossFn& loss, const ParamSet<double>& params,
                                   std::size_t probes, double step = 1e-5,
                                   std::uint64_t seed = 1);

}  // namespace semlab::nn
