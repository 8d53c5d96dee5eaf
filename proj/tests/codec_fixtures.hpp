// SPDX-License-Identifier: Apache-2.0
//
// Small codec configurations and random inputs shared by the test binaries.
#pragma once

#include <cmath>
#include <random>

#include "semlab/codec/codec.hpp"
#include "semlab/vib/loss.hpp"

namespace semlab::testing {

/// F = 8, K = {4, 8, 12, 16}, k_M = 16.
inline codec::CodecConfig small_config() {
  codec::CodecConfig cfg;
  cfg.feature_dim = 8;
  cfg.feature_width = 16;
  cfg.heads = codec::SymbolDimSet({4, 8, 12, 16});
  cfg.k_max = 16;
  cfg.decoder_widths = {24, 12};
  cfg.seed = 3;
  return cfg;
}

template <class T = double>
codec::CodecBatch<T> random_batch(const codec::CodecConfig& cfg, std::size_t rows,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  codec::CodecBatch<T> b{nn::Tensor<T>({rows, cfg.feature_dim}),
                         nn::Tensor<T>({rows, codec::kImuDim}), nn::Tensor<T>({rows, 1})};
  for (std::size_t i = 0; i < b.features.size(); ++i) b.features[i] = static_cast<T>(u(rng));
  for (std::size_t i = 0; i < b.imu.size(); ++i) b.imu[i] = static_cast<T>(u(rng));
  for (std::size_t i = 0; i < rows; ++i) b.snr_db[i] = static_cast<T>(30 * u(rng));
  return b;
}

template <class T = double>
vib::PoseTargets<T> random_targets(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  vib::PoseTargets<T> t{nn::Tensor<T>({rows, 3}), nn::Tensor<T>({rows, 4})};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < 3; ++j) t.position.at(r, j) = static_cast<T>(2 * n(rng));
    double q[4], len = 0;
    for (double& v : q) len += (v = n(rng)) * v;
    len = std::sqrt(len);
    for (std::size_t j = 0; j < 4; ++j) t.quat.at(r, j) = static_cast<T>(q[j] / len);
  }
  return t;
}

inline vib::ChannelPlan noisy_plan(std::size_t rows, std::uint64_t seed) {
  vib::ChannelPlan plan;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> db(-5, 30);
  for (std::size_t i = 0; i < rows; ++i) {
    plan.snr_linear.push_back(std::pow(10.0, db(rng) / 10));
    plan.noise_seed.push_back(seed * 1000 + i);
  }
  return plan;
}

}  // namespace semlab::testing
