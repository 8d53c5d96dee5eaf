// SPDX-License-Identifier: Apache-2.0
#include "semlab/vib/loss.hpp"

#include <cmath>
#include <map>

#include "semlab/channel/channel.hpp"

namespace semlab::vib {

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
}

double kl_to_standard_normal(std::span<const double> mu, std::span<const double> sigma) {
  if (mu.size() != sigma.size()) throw ConfigError("mu and sigma lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc += mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0 - 2.0 * std::log(sigma[i]);
  return 0.5 * acc;
}

template <class T>
VibTerms<T> vib_minibatch_loss(codec::CodecGraph<T>& cg,
                               const typename codec::CodecGraph<T>::Gaussian& gauss,
                               const nn::Tensor<T>& eps, const PoseTargets<T>& targets,
                               double alpha) {
  auto& g = cg.graph();
  const auto sample = cg.reparameterize(gauss, eps);
  const auto [pos, quat] = cg.split_pose(cg.decode(sample));
  const auto per_sample_kl = g.kl_standard_normal(gauss.mu, gauss.sigma);
  const auto distortion =
      g.app_distortion(pos, quat, targets.position, targets.quat, static_cast<T>(alpha));
  return {g.mean(distortion), g.mean(per_sample_kl), per_sample_kl};
}

template <class T>
typename nn::Graph<T>::Var channel_path(codec::CodecGraph<T>& cg,
                                        const typename codec::CodecGraph<T>::Latent& latent,
                                        const ChannelPlan& plan) {
  auto& g = cg.graph();
  const std::size_t n = g.value(latent.z).rows();
  if (plan.k.size() != n || plan.snr_linear.size() != n || plan.noise_seed.size() != n)
    throw ConfigError("channel plan covers " + std::to_string(plan.k.size()) +
                      " samples, batch has " + std::to_string(n));
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[plan.k[i]].push_back(i);

  const std::size_t width = cg.config().latent_width();
  std::vector<typename nn::Graph<T>::Var> parts;
  std::vector<std::vector<std::size_t>> rows;
  for (const auto& [k, members] : groups) {
    const auto z = g.gather_rows(latent.z, members);
    const auto snr = g.gather_rows(latent.snr_in, members);
    auto symbols = cg.encode_symbols(z, snr, k);
    if (!plan.noiseless) {
      nn::Tensor<T> noise({members.size(), 2 * k});
      for (std::size_t j = 0; j < members.size(); ++j) {
        const auto n_j =
            channel::awgn_noise(2 * k, plan.snr_linear[members[j]], plan.noise_seed[members[j]]);
        for (std::size_t c = 0; c < 2 * k; ++c) noise.at(j, c) = static_cast<T>(n_j[c]);
      }
      symbols = g.add(symbols, g.constant(std::move(noise)));
    }
    parts.push_back(2 * k == width ? symbols : g.pad_cols(symbols, width));
    rows.push_back(members);
  }
  return cg.decode(g.scatter_rows(parts, rows, n));
}

template <class T>
LossBreakdown TotalLoss<T>::breakdown(const nn::Graph<T>& g) const {
  return {static_cast<double>(g.value(app)[0]), static_cast<double>(g.value(reconstruction)[0]),
          static_cast<double>(g.value(kl)[0]), static_cast<double>(g.value(total)[0])};
}

template <class T>
TotalLoss<T> total_loss(codec::CodecGraph<T>& cg, const codec::CodecBatch<T>& batch,
                        const PoseTargets<T>& targets, const nn::Tensor<T>& eps,
                        ChannelPlan plan, const KChooser& choose_k, const LossWeights& w) {
  w.validate();
  auto& g = cg.graph();
  const auto latent = cg.extract_latent(batch);
  const auto gauss = cg.variational_encode(latent);
  const auto vib = vib_minibatch_loss(cg, gauss, eps, targets, w.alpha);

  const auto& kl_values = g.value(vib.kl_per_sample);
  std::vector<double> kl(kl_values.size());
  for (std::size_t i = 0; i < kl.size(); ++i) kl[i] = static_cast<double>(kl_values[i]);
  plan.k = choose_k(kl);

  const auto [pos, quat] = cg.split_pose(channel_path(cg, latent, plan));
  const auto pose = g.concat_cols(std::vector{pos, quat});
  const auto app = g.mean(
      g.app_distortion(pos, quat, targets.position, targets.quat, static_cast<T>(w.alpha)));

  const typename nn::Graph<T>::Var vib_terms[] = {vib.reconstruction, vib.kl};
  const T vib_coeffs[] = {T(1), static_cast<T>(w.beta)};
  const auto vib_sum = g.weighted_sum(vib_terms, vib_coeffs);
  const typename nn::Graph<T>::Var terms[] = {app, vib_sum};
  const T coeffs[] = {T(1), static_cast<T>(w.eta)};
  const auto total = g.weighted_sum(terms, coeffs);
  return {app, vib.reconstruction, vib.kl, total, vib.kl_per_sample, pose, std::move(plan.k)};
}

#define SEMLAB_VIB_INSTANTIATE(T)                                                            \
  template VibTerms<T> vib_minibatch_loss<T>(codec::CodecGraph<T>&,                          \
                                             const codec::CodecGraph<T>::Gaussian&,          \
                                             const nn::Tensor<T>&, const PoseTargets<T>&,    \
                                             double);                                        \
  template nn::Graph<T>::Var channel_path<T>(codec::CodecGraph<T>&,                          \
                                             const codec::CodecGraph<T>::Latent&,            \
                                             const ChannelPlan&);                            \
  template struct TotalLoss<T>;                                                              \
  template TotalLoss<T> total_loss<T>(codec::CodecGraph<T>&, const codec::CodecBatch<T>&,    \
                                      const PoseTargets<T>&, const nn::Tensor<T>&,           \
                                      ChannelPlan, const KChooser&, const LossWeights&);

SEMLAB_VIB_INSTANTIATE(float)
SEMLAB_VIB_INSTANTIATE(double)

}  // namespace semlab::vib
