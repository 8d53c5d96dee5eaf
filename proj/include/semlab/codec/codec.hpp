// SPDX-License-Identifier: Apache-2.0
//
// The four learned blocks: latent extractor (fz.*), variational head (fshat),
// one symbol head per admissible k (fs.head<k>) and the pose decoder (fd.*).
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semlab/codec/symbol_dims.hpp"
#include "semlab/numerics/graph.hpp"
#include "semlab/numerics/mlp.hpp"

namespace semlab::codec {

inline constexpr std::size_t kImuDim = 4;
inline constexpr std::size_t kPoseDim = 6;
/// SNR feedback enters the networks as snr_db * kSnrInputScale.
inline constexpr double kSnrInputScale = 0.1;
inline constexpr double kSigmaMin = 1e-6;
inline constexpr double kSigmaMax = 1e6;

struct CodecConfig {
  std::size_t feature_dim = 64;
  /// Width of the fully connected feature branch.
  std::size_t feature_width = 128;
  SymbolDimSet heads = SymbolDimSet::defaults();
  /// k_M. At least heads.max(); larger values keep the latent and decoder
  /// input width fixed when only a subset of heads is trained.
  std::size_t k_max = 512;
  std::vector<std::size_t> decoder_widths{512, 128, 32};
  double leaky_slope = nn::kDefaultLeakySlope;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t latent_width() const noexcept { return 2 * k_max; }
  std::string to_json() const;
  static CodecConfig from_json(const std::string& text);
};

std::string head_name(std::size_t k);

/// Layer lists, in parameter-set order.
nn::LayerList feature_branch_layers(const CodecConfig& cfg);
nn::LayerList imu_branch_layers(const CodecConfig& cfg);
nn::LayerList latent_layers(const CodecConfig& cfg);
nn::LayerSpec variational_layer(const CodecConfig& cfg);
nn::LayerSpec head_layer(const CodecConfig& cfg, std::size_t k);
nn::LayerList decoder_layers(const CodecConfig& cfg);

template <class T>
nn::ParamSet<T> init_codec_params(const CodecConfig& cfg);

/// Throws ConfigError if `params` does not hold exactly the layers of `cfg`.
template <class T>
void require_codec_layout(const CodecConfig& cfg, const nn::ParamSet<T>& params);

template <class T>
struct CodecBatch {
  nn::Tensor<T> features;  // B x F
  nn::Tensor<T> imu;       // B x 4
  nn::Tensor<T> snr_db;    // B x 1
  std::size_t rows() const noexcept { return features.rows(); }
  void validate(const CodecConfig& cfg) const;
};

/// Graph builders bound to one graph, config and parameter set.
template <class T>
class CodecGraph {
 public:
  using G = nn::Graph<T>;
  using Var = typename G::Var;

  struct Latent {
    Var z;       // B x 2k_M
    Var snr_in;  // B x 1, scaled
  };
  struct Gaussian {
    Var mu;     // B x 2k_M
    Var sigma;  // B x 2k_M
  };

  CodecGraph(G& graph, const CodecConfig& cfg, const nn::ParamSet<T>& params);

  G& graph() noexcept { return g_; }
  const CodecConfig& config() const noexcept { return cfg_; }

  Latent extract_latent(const CodecBatch<T>& batch);
  Gaussian variational_encode(const Latent& latent);
  /// mu + sigma * eps; eps has the latent shape.
  Var reparameterize(const Gaussian& gauss, const nn::Tensor<T>& eps);
  /// Head k only: tanh then unit-power normalization. k not in heads -> PolicyError.
  Var encode_symbols(Var z, Var snr_in, std::size_t k);
  /// Zero-pads 2k columns to 2k_M and runs the decoder. Outputs B x 6.
  Var decode(Var received);
  /// Rows of (position, rotation vector) -> (position B x 3, quaternion B x 4).
  std::pair<Var, Var> split_pose(Var pose6);

 private:
  Var stack(Var x, const nn::LayerList& layers);

  G& g_;
  const CodecConfig& cfg_;
  const nn::ParamSet<T>& params_;
};

/// eps rows drawn from per-row seeds.
template <class T>
nn::Tensor<T> standard_normal_rows(std::span<const std::uint64_t> row_seeds, std::size_t cols);

extern template class CodecGraph<float>;
extern template class CodecGraph<double>;

}  // namespace semlab::codec
