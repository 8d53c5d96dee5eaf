// SPDX-License-Identifier: Apache-2.0
//
// k_bar = gamma * KL; k* = max{k in K : k <= k_bar, tau(k) <= tau_th}.
#pragma once

#include <cstddef>

#include "semlab/channel/channel.hpp"
#include "semlab/codec/symbol_dims.hpp"

namespace semlab::policy {

struct PolicyConfig {
  double gamma = 100.0;
  double tau_th_ms = 16.0;
  codec::SymbolDimSet ks = codec::SymbolDimSet::defaults();
  channel::LatencyModel latency;

  /// gamma, tau_th > 0; latency model valid and covering every k.
  void validate() const;
};

double estimate_kbar(double kl_nats, double gamma);

/// Largest latency-feasible k not above k_bar; the smallest feasible k when
/// k_bar is below every candidate. Throws InfeasibleBudgetError when no k fits.
std::size_t select_k(double kbar, const PolicyConfig& cfg);

/// Training-time quantization: largest k <= max(k_bar, min K), no latency check.
std::size_t training_k(double kbar, const codec::SymbolDimSet& ks);

}  // namespace semlab::policy
