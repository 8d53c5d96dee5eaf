// SPDX-License-Identifier: Apache-2.0
#include "semlab/codec/codec.hpp"

#include <random>

#include <json.hpp>

#include "semlab/util/seed.hpp"

namespace semlab::codec {

using nn::Activation;
using nn::LayerList;
using nn::LayerSpec;

void CodecConfig::validate() const {
  if (feature_dim == 0) throw ConfigError("feature_dim must be > 0");
  if (feature_width == 0) throw ConfigError("feature_width must be > 0");
  if (k_max < heads.max())
    throw ConfigError("k_max " + std::to_string(k_max) + " is below the largest head " +
                      std::to_string(heads.max()));
  for (std::size_t w : decoder_widths)
    if (w == 0) throw ConfigError("decoder widths must be > 0");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
    throw ConfigError("leaky slope must lie in [0, 1)");
}

std::string CodecConfig::to_json() const {
  nlohmann::json j;
  j["feature_dim"] = feature_dim;
  j["feature_width"] = feature_width;
  j["heads"] = heads.values();
  j["k_max"] = k_max;
  j["decoder_widths"] = decoder_widths;
  j["leaky_slope"] = leaky_slope;
  j["seed"] = seed;
  return j.dump();
}

CodecConfig CodecConfig::from_json(const std::string& text) {
  CodecConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    cfg.feature_dim = j.at("feature_dim").get<std::size_t>();
    cfg.feature_width = j.at("feature_width").get<std::size_t>();
    cfg.heads = SymbolDimSet(j.at("heads").get<std::vector<std::size_t>>());
    cfg.k_max = j.at("k_max").get<std::size_t>();
    cfg.decoder_widths = j.at("decoder_widths").get<std::vector<std::size_t>>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed codec config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string head_name(std::size_t k) { return "fs.head" + std::to_string(k); }

LayerList feature_branch_layers(const CodecConfig& cfg) {
  return {{"fz.visual", cfg.feature_dim, cfg.feature_width, Activation::kLeakyRelu}};
}

LayerList imu_branch_layers(const CodecConfig&) {
  return {{"fz.imu1", kImuDim, 8, Activation::kLeakyRelu},
          {"fz.imu2", 8, kImuDim, Activation::kLeakyRelu}};
}

LayerList latent_layers(const CodecConfig& cfg) {
  const std::size_t in = cfg.feature_width + kImuDim + 1;
  return {{"fz.fc1", in, 2 * cfg.latent_width(), Activation::kLeakyRelu},
          {"fz.fc2", 2 * cfg.latent_width(), cfg.latent_width(), Activation::kLeakyRelu}};
}

LayerSpec variational_layer(const CodecConfig& cfg) {
  return {"fshat", cfg.latent_width() + 1, 2 * cfg.latent_width(), Activation::kIdentity};
}

LayerSpec head_layer(const CodecConfig& cfg, std::size_t k) {
  return {head_name(k), cfg.latent_width() + 1, 2 * k, Activation::kTanh};
}

LayerList decoder_layers(const CodecConfig& cfg) {
  LayerList out;
  std::size_t in = cfg.latent_width();
  for (std::size_t i = 0; i < cfg.decoder_widths.size(); ++i) {
    out.push_back({"fd.fc" + std::to_string(i + 1), in, cfg.decoder_widths[i],
                   Activation::kLeakyRelu});
    in = cfg.decoder_widths[i];
  }
  out.push_back({"fd.fc" + std::to_string(cfg.decoder_widths.size() + 1), in, kPoseDim,
                 Activation::kIdentity});
  return out;
}

namespace {

LayerList all_layers(const CodecConfig& cfg) {
  LayerList out = feature_branch_layers(cfg);
  for (auto& l : imu_branch_layers(cfg)) out.push_back(l);
  for (auto& l : latent_layers(cfg)) out.push_back(l);
  out.push_back(variational_layer(cfg));
  for (std::size_t k : cfg.heads) out.push_back(head_layer(cfg, k));
  for (auto& l : decoder_layers(cfg)) out.push_back(l);
  return out;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

}  // namespace

template <class T>
nn::ParamSet<T> init_codec_params(const CodecConfig& cfg) {
  cfg.validate();
  nn::ParamSet<T> params;
  // each layer draws from its own stream so adding a head leaves others unchanged
  for (const auto& layer : all_layers(cfg))
    nn::init_layers(params, {layer}, util::derive_seed(cfg.seed, name_hash(layer.name)));
  return params;
}

template <class T>
void require_codec_layout(const CodecConfig& cfg, const nn::ParamSet<T>& params) {
  const auto layers = all_layers(cfg);
  if (layers.size() != params.layer_count())
    throw ConfigError("parameter set has " + std::to_string(params.layer_count()) +
                      " layers, codec config expects " + std::to_string(layers.size()));
  for (const auto& l : layers) {
    if (!params.contains(l.name)) throw ConfigError("parameter set lacks layer '" + l.name + "'");
    const auto& p = params.at(l.name);
    if (p.weights.rows() != l.out || p.weights.cols() != l.in || p.biases.size() != l.out)
      throw ConfigError("layer '" + l.name + "' has shape " + nn::shape_string(p.weights.shape()) +
                        ", expected [" + std::to_string(l.out) + ", " + std::to_string(l.in) +
                        "]");
  }
}

template <class T>
void CodecBatch<T>::validate(const CodecConfig& cfg) const {
  const std::size_t n = features.rows();
  if (features.cols() != cfg.feature_dim)
    throw ConfigError("feature width " + std::to_string(features.cols()) + " != configured " +
                      std::to_string(cfg.feature_dim));
  if (imu.cols() != kImuDim || imu.rows() != n)
    throw ConfigError("imu input must be " + std::to_string(n) + " x 4, got " +
                      nn::shape_string(imu.shape()));
  if (snr_db.cols() != 1 || snr_db.rows() != n)
    throw ConfigError("snr input must be " + std::to_string(n) + " x 1, got " +
                      nn::shape_string(snr_db.shape()));
}

template <class T>
CodecGraph<T>::CodecGraph(G& graph, const CodecConfig& cfg, const nn::ParamSet<T>& params)
    : g_(graph), cfg_(cfg), params_(params) {}

template <class T>
typename CodecGraph<T>::Var CodecGraph<T>::stack(Var x, const nn::LayerList& layers) {
  return nn::mlp_forward(g_, x, params_, layers, static_cast<T>(cfg_.leaky_slope));
}

template <class T>
typename CodecGraph<T>::Latent CodecGraph<T>::extract_latent(const CodecBatch<T>& batch) {
  batch.validate(cfg_);
  nn::Tensor<T> scaled = batch.snr_db;
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= static_cast<T>(kSnrInputScale);
  const Var snr_in = g_.constant(std::move(scaled));
  const Var visual = stack(g_.constant(batch.features), feature_branch_layers(cfg_));
  const Var imu = stack(g_.constant(batch.imu), imu_branch_layers(cfg_));
  const Var parts[] = {visual, imu, snr_in};
  return {stack(g_.concat_cols(parts), latent_layers(cfg_)), snr_in};
}

template <class T>
typename CodecGraph<T>::Gaussian CodecGraph<T>::variational_encode(const Latent& latent) {
  const Var parts[] = {latent.z, latent.snr_in};
  const Var raw = stack(g_.concat_cols(parts), {variational_layer(cfg_)});
  const std::size_t w = cfg_.latent_width();
  return {g_.slice_cols(raw, 0, w),
          g_.exp_clamped(g_.slice_cols(raw, w, 2 * w), static_cast<T>(kSigmaMin),
                         static_cast<T>(kSigmaMax))};
}

template <class T>
typename CodecGraph<T>::Var CodecGraph<T>::reparameterize(const Gaussian& gauss,
                                                          const nn::Tensor<T>& eps) {
  if (eps.shape() != g_.value(gauss.mu).shape())
    throw ConfigError("noise shape " + nn::shape_string(eps.shape()) +
                      " does not match latent shape " +
                      nn::shape_string(g_.value(gauss.mu).shape()));
  return g_.add(gauss.mu, g_.mul(gauss.sigma, g_.constant(eps)));
}

template <class T>
typename CodecGraph<T>::Var CodecGraph<T>::encode_symbols(Var z, Var snr_in, std::size_t k) {
  if (!cfg_.heads.contains(k))
    throw PolicyError("symbol count " + std::to_string(k) + " is not in K = {" +
                      cfg_.heads.to_string() + "}");
  const Var parts[] = {z, snr_in};
  return g_.power_normalize(stack(g_.concat_cols(parts), {head_layer(cfg_, k)}));
}

template <class T>
typename CodecGraph<T>::Var CodecGraph<T>::decode(Var received) {
  const std::size_t width = g_.value(received).cols();
  if (width % 2 != 0)
    throw FramingError("received block has odd width " + std::to_string(width));
  if (width > cfg_.latent_width())
    throw FramingError("received block of " + std::to_string(width / 2) +
                       " symbols exceeds k_M = " + std::to_string(cfg_.k_max));
  const Var padded = width == cfg_.latent_width() ? received
                                                  : g_.pad_cols(received, cfg_.latent_width());
  return stack(padded, decoder_layers(cfg_));
}

template <class T>
std::pair<typename CodecGraph<T>::Var, typename CodecGraph<T>::Var> CodecGraph<T>::split_pose(
    Var pose6) {
  return {g_.slice_cols(pose6, 0, 3), g_.rotvec_to_quat(g_.slice_cols(pose6, 3, 6))};
}

template <class T>
nn::Tensor<T> standard_normal_rows(std::span<const std::uint64_t> row_seeds, std::size_t cols) {
  nn::Tensor<T> out({row_seeds.size(), cols});
  for (std::size_t r = 0; r < row_seeds.size(); ++r) {
    std::mt19937_64 rng(row_seeds[r]);
    std::normal_distribution<double> gauss;
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = static_cast<T>(gauss(rng));
  }
  return out;
}

template nn::ParamSet<float> init_codec_params<float>(const CodecConfig&);
template nn::ParamSet<double> init_codec_params<double>(const CodecConfig&);
template void require_codec_layout<float>(const CodecConfig&, const nn::ParamSet<float>&);
template void require_codec_layout<double>(const CodecConfig&, const nn::ParamSet<double>&);
template struct CodecBatch<float>;
template struct CodecBatch<double>;
template class CodecGraph<float>;
template class CodecGraph<double>;
template nn::Tensor<float> standard_normal_rows<float>(std::span<const std::uint64_t>,
                                                       std::size_t);
template nn::Tensor<double> standard_normal_rows<double>(std::span<const std::uint64_t>,
                                                         std::size_t);

}  // namespace semlab::codec
