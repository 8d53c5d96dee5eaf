// SPDX-License-Identifier: Apache-2.0
//
// Channel-aware VIB terms and the total training loss
//   total = app + eta * (recon + beta * kl).
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "semlab/codec/codec.hpp"

namespace semlab::vib {

struct LossWeights {
  double alpha = 0.7;
  double beta = 1.0;
  double eta = 0.2;
  double gamma = 100.0;
  void validate() const;
};

struct LossBreakdown {
  double app_distortion = 0.0;
  double vib_reconstruction = 0.0;
  double vib_kl = 0.0;
  double total = 0.0;
};

/// 0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2), in nats.
double kl_to_standard_normal(std::span<const double> mu, std::span<const double> sigma);

template <class T>
struct PoseTargets {
  nn::Tensor<T> position;  // B x 3
  nn::Tensor<T> quat;      // B x 4, unit rows
};

/// Per-sample channel-path settings.
struct ChannelPlan {
  std::vector<std::size_t> k;
  std::vector<double> snr_linear;
  std::vector<std::uint64_t> noise_seed;
  bool noiseless = false;
};

template <class T>
struct VibTerms {
  typename nn::Graph<T>::Var reconstruction;  // scalar, batch mean
  typename nn::Graph<T>::Var kl;              // scalar, batch mean
  typename nn::Graph<T>::Var kl_per_sample;   // B x 1
};

/// Single-sample Monte-Carlo VIB terms: decode(mu + sigma * eps) scored by the
/// application distortion, plus the KL to the standard-normal prior.
template <class T>
VibTerms<T> vib_minibatch_loss(codec::CodecGraph<T>& cg,
                               const typename codec::CodecGraph<T>::Gaussian& gauss,
                               const nn::Tensor<T>& eps, const PoseTargets<T>& targets,
                               double alpha);

/// Encodes each row with its own head, adds AWGN, zero-pads and decodes.
/// Only heads named in plan.k enter the graph. Returns the decoder output B x 6.
template <class T>
typename nn::Graph<T>::Var channel_path(codec::CodecGraph<T>& cg,
                                        const typename codec::CodecGraph<T>::Latent& latent,
                                        const ChannelPlan& plan);

template <class T>
struct TotalLoss {
  typename nn::Graph<T>::Var app;
  typename nn::Graph<T>::Var reconstruction;
  typename nn::Graph<T>::Var kl;
  typename nn::Graph<T>::Var total;
  typename nn::Graph<T>::Var kl_per_sample;
  typename nn::Graph<T>::Var pose;  // channel path: position and unit quaternion, B x 7
  std::vector<std::size_t> k;       // chosen per sample

  LossBreakdown breakdown(const nn::Graph<T>& g) const;
};

/// Picks per-sample k from per-sample KL (nats).
using KChooser = std::function<std::vector<std::size_t>(std::span<const double> kl)>;

/// Full forward pass for one minibatch. `plan.k` is filled by `choose_k`
/// after the variational head has been evaluated.
template <class T>
TotalLoss<T> total_loss(codec::CodecGraph<T>& cg, const codec::CodecBatch<T>& batch,
                        const PoseTargets<T>& targets, const nn::Tensor<T>& eps,
                        ChannelPlan plan, const KChooser& choose_k, const LossWeights& w);

}  // namespace semlab::vib
