// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "semlab/error.hpp"
#include "semlab/policy/policy.hpp"

using namespace semlab;
using namespace semlab::policy;

namespace {

// enc(k) = base + slope * k, dec = 0.5
channel::LatencyModel linear_latency(const codec::SymbolDimSet& ks, double base, double slope) {
  channel::LatencyModel m;
  for (std::size_t k : ks) m.enc_ms[k] = base + slope * k;
  m.dec_ms = 0.5;
  return m;
}

PolicyConfig generous() {
  PolicyConfig cfg;
  cfg.latency = linear_latency(cfg.ks, 1.0, 0.001);
  return cfg;
}

}  // namespace

TEST_CASE("estimate_kbar: examples") {
  CHECK(estimate_kbar(0.0, 100.0) == 0.0);
  CHECK(std::abs(estimate_kbar(2.56, 100.0) - 256.0) <= 1e-12);
  CHECK(estimate_kbar(1.3, 200.0) == 2 * estimate_kbar(1.3, 100.0));
  CHECK_THROWS_AS(estimate_kbar(-0.1, 100.0), NumericError);
}

TEST_CASE("select_k: examples") {
  auto cfg = generous();
  CHECK(select_k(300.0, cfg) == 256);
  CHECK(select_k(512.0, cfg) == 512);
  CHECK(select_k(50.0, cfg) == 64);
  CHECK(select_k(0.0, cfg) == 64);
  // only k <= 128 fits: enc(k) + airtime + 0.5 <= 16 with enc = 0.1 k
  cfg.latency = linear_latency(cfg.ks, 0.0, 0.1);
  CHECK(select_k(1e6, cfg) == 128);
  CHECK(e2e_latency_ms(128, cfg.latency) <= 16.0);
  CHECK(e2e_latency_ms(192, cfg.latency) > 16.0);
}

TEST_CASE("select_k: infeasible budget is an error, never a silent violation") {
  auto cfg = generous();
  const double floor_ms = e2e_latency_ms(64, cfg.latency);
  cfg.tau_th_ms = floor_ms * 0.999;
  CHECK_THROWS_AS(select_k(300.0, cfg), InfeasibleBudgetError);
  CHECK_THROWS_AS(select_k(10.0, cfg), InfeasibleBudgetError);
  cfg.tau_th_ms = floor_ms;
  CHECK(select_k(300.0, cfg) == 64);
}

TEST_CASE("PolicyConfig validation") {
  auto cfg = generous();
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = generous();
  cfg.tau_th_ms = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = generous();
  cfg.latency.enc_ms.erase(448);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training_k quantizes without a latency check") {
  const auto ks = codec::SymbolDimSet::defaults();
  CHECK(training_k(0.0, ks) == 64);
  CHECK(training_k(63.9, ks) == 64);
  CHECK(training_k(191.9, ks) == 128);
  CHECK(training_k(192.0, ks) == 192);
  CHECK(training_k(1e9, ks) == 512);
}

TEST_CASE("select_k properties over random latency models") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  const auto ks = codec::SymbolDimSet::defaults();
  for (int trial = 0; trial < 200; ++trial) {
    PolicyConfig cfg;
    cfg.latency = linear_latency(ks, 20 * u(rng), 0.05 * u(rng));
    cfg.tau_th_ms = 1 + 30 * u(rng);
    std::size_t prev = 0;
    for (double kbar = 0; kbar <= 700; kbar += 7) {
      std::size_t k = 0;
      try {
        k = select_k(kbar, cfg);
      } catch (const InfeasibleBudgetError&) {
        CHECK(e2e_latency_ms(ks.min(), cfg.latency) > cfg.tau_th_ms);
        break;
      }
      CHECK(ks.contains(k));
      CHECK(e2e_latency_ms(k, cfg.latency) <= cfg.tau_th_ms);
      CHECK(k >= prev);  // non-decreasing in k_bar
      prev = k;
      // a tighter budget never raises k*
      PolicyConfig tight = cfg;
      tight.tau_th_ms = cfg.tau_th_ms * u(rng);
      if (e2e_latency_ms(ks.min(), tight.latency) <= tight.tau_th_ms)
        CHECK(select_k(kbar, tight) <= k);
      else
        CHECK_THROWS_AS(select_k(kbar, tight), InfeasibleBudgetError);
    }
  }
}
