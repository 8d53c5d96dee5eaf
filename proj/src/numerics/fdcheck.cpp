// SPDX-License-Identifier: Apache-2.0
#include "semlab/numerics/fdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace semlab::nn {

FiniteDiffReport finite_diff_check(const LossFn& loss, const ParamSet<double>& params,
                                   std::size_t probes, double step, std::uint64_t seed) {
  FiniteDiffReport report;
  const std::size_t total = params.parameter_count();
  if (total == 0 || probes == 0) return report;

  ParamSet<double> analytic = params.zeros_like();
  loss(params, &analytic);

  // Flat index -> (layer, tensor, offset).
  struct Slot {
    std::string layer;
    bool weights;
    std::size_t size;
  };
  std::vector<Slot> slots;
  for (const auto& [name, layer] : params) {
    slots.push_back({name, true, layer.weights.size()});
    slots.push_back({name, false, layer.biases.size()});
  }

  ParamSet<double> probe = params;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t i = 0; i < probes; ++i) {
    std::size_t flat = pick(rng);
    std::size_t s = 0;
    while (flat >= slots[s].size) flat -= slots[s++].size;
    auto& target = slots[s].weights ? probe.at(slots[s].layer).weights
                                    : probe.at(slots[s].layer).biases;
    const auto& grad = slots[s].weights ? analytic.at(slots[s].layer).weights
                                        : analytic.at(slots[s].layer).biases;
    const double original = target[flat];
    target[flat] = original + step;
    const double up = loss(probe, nullptr);
    target[flat] = original - step;
    const double down = loss(probe, nullptr);
    target[flat] = original;

    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(grad[flat] - numeric) / std::max(1e-12, std::abs(numeric));
    ++report.probes_executed;
    if (err >= report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_coordinate = slots[s].layer + (slots[s].weights ? ".weights[" : ".biases[") +
                                std::to_string(flat) + "]";
      report.worst_analytic = grad[flat];
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace semlab::nn
