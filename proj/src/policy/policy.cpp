// SPDX-License-Identifier: Apache-2.0
#include "semlab/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semlab/error.hpp"

namespace semlab::policy {

void PolicyConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (!(tau_th_ms > 0.0)) throw ConfigError("latency budget tau_th must be > 0");
  latency.validate();
  for (std::size_t k : ks)
    if (!latency.enc_ms.contains(k))
      throw ConfigError("latency model has no entry for k=" + std::to_string(k));
}

double estimate_kbar(double kl_nats, double gamma) {
  if (!(kl_nats >= 0.0)) throw NumericError("KL must be non-negative and finite");
  return gamma * kl_nats;
}

std::size_t select_k(double kbar, const PolicyConfig& cfg) {
  std::size_t best = 0, smallest_feasible = 0;
  for (std::size_t k : cfg.ks) {
    if (channel::e2e_latency_ms(k, cfg.latency) > cfg.tau_th_ms) continue;
    if (smallest_feasible == 0) smallest_feasible = k;
    if (static_cast<double>(k) <= kbar) best = k;
  }
  if (smallest_feasible == 0) {
    std::ostringstream msg;
    msg << "no symbol count meets the " << cfg.tau_th_ms << " ms budget (tau("
        << cfg.ks.min() << ") = " << channel::e2e_latency_ms(cfg.ks.min(), cfg.latency)
        << " ms)";
    throw InfeasibleBudgetError(msg.str());
  }
  return best != 0 ? best : smallest_feasible;
}

std::size_t training_k(double kbar, const codec::SymbolDimSet& ks) {
  const double target = std::max(kbar, static_cast<double>(ks.min()));
  std::size_t best = ks.min();
  for (std::size_t k : ks)
    if (static_cast<double>(k) <= target) best = k;
  return best;
}

}  // namespace semlab::policy
