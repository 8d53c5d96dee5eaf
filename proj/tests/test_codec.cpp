// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "codec_fixtures.hpp"
#include "semlab/codec/codec.hpp"
#include "semlab/error.hpp"

using namespace semlab;
using namespace semlab::codec;
using nn::Tensor;
using G = nn::Graph<double>;
using CG = CodecGraph<double>;
using testing::random_batch;
using testing::small_config;

namespace {

CodecConfig toy_config() {
  CodecConfig cfg;
  cfg.feature_dim = 2;
  cfg.feature_width = 2;
  cfg.heads = SymbolDimSet({1, 2});
  cfg.k_max = 2;
  cfg.decoder_widths = {3};
  cfg.seed = 5;
  return cfg;
}

nn::ParamSet<double> zero_params(const CodecConfig& cfg) {
  auto p = init_codec_params<double>(cfg);
  p.set_zero();
  return p;
}

// Independent loop-level evaluation of one dense layer.
std::vector<double> dense(const nn::LayerParams<double>& l, const std::vector<double>& x,
                          nn::Activation act, double slope) {
  const std::size_t out = l.weights.rows(), in = l.weights.cols();
  REQUIRE(x.size() == in);
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double s = l.biases[o];
    for (std::size_t i = 0; i < in; ++i) s += l.weights.at(o, i) * x[i];
    switch (act) {
      case nn::Activation::kLeakyRelu: s = s > 0 ? s : slope * s; break;
      case nn::Activation::kTanh: s = std::tanh(s); break;
      default: break;
    }
    y[o] = s;
  }
  return y;
}

std::vector<double> cat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("SymbolDimSet: defaults, parsing, validation") {
  const auto d = SymbolDimSet::defaults();
  CHECK(d.values() == std::vector<std::size_t>{64, 128, 192, 256, 320, 384, 448, 512});
  CHECK(d.max() == 512);
  CHECK(d.min() == 64);
  CHECK(SymbolDimSet::parse("64, 128,256") == SymbolDimSet({64, 128, 256}));
  CHECK(SymbolDimSet::parse(d.to_string()) == d);
  CHECK(d.contains(192));
  CHECK_FALSE(d.contains(100));
  CHECK_THROWS_AS(SymbolDimSet({128, 64}), ConfigError);
  CHECK_THROWS_AS(SymbolDimSet({64, 64}), ConfigError);
  CHECK_THROWS_AS(SymbolDimSet({0, 64}), ConfigError);
  CHECK_THROWS_AS(SymbolDimSet(std::vector<std::size_t>{}), ConfigError);
  CHECK_THROWS_AS(SymbolDimSet::parse("64,x"), ConfigError);
  CHECK_THROWS_AS(SymbolDimSet::parse(""), ConfigError);
}

TEST_CASE("CodecConfig: validation and JSON round trip") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  const auto back = CodecConfig::from_json(cfg.to_json());
  CHECK(back.feature_dim == cfg.feature_dim);
  CHECK(back.heads == cfg.heads);
  CHECK(back.k_max == cfg.k_max);
  CHECK(back.decoder_widths == cfg.decoder_widths);
  CHECK(back.seed == cfg.seed);
  cfg.k_max = 8;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.feature_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("default architecture widths") {
  const CodecConfig cfg;
  CHECK(latent_layers(cfg)[0].in == cfg.feature_width + kImuDim + 1);
  CHECK(latent_layers(cfg)[0].out == 2048);
  CHECK(latent_layers(cfg)[1].out == 1024);
  CHECK(variational_layer(cfg).in == 1025);
  CHECK(variational_layer(cfg).out == 2048);
  CHECK(head_layer(cfg, 64).out == 128);
  const auto dec = decoder_layers(cfg);
  REQUIRE(dec.size() == 4);
  CHECK(dec[0].in == 1024);
  CHECK(dec[0].out == 512);
  CHECK(dec[1].out == 128);
  CHECK(dec[2].out == 32);
  CHECK(dec[3].out == 6);
  CHECK(imu_branch_layers(cfg)[0].out == 8);
  CHECK(imu_branch_layers(cfg)[1].out == 4);
}

TEST_CASE("parameter init is deterministic and layout-checked") {
  const auto cfg = small_config();
  const auto a = init_codec_params<double>(cfg), b = init_codec_params<double>(cfg);
  for (const auto& [name, layer] : a) CHECK(layer.weights == b.at(name).weights);
  auto other = cfg;
  other.seed = 4;
  CHECK_FALSE(init_codec_params<double>(other).at("fz.fc1").weights == a.at("fz.fc1").weights);
  CHECK_NOTHROW(require_codec_layout(cfg, a));
  auto wider = cfg;
  wider.heads = SymbolDimSet({4, 8});
  CHECK_THROWS_AS(require_codec_layout(wider, a), ConfigError);
}

TEST_CASE("zero weights: z = 0, mu = 0, sigma = 1, zero symbols, zero pose") {
  const auto cfg = small_config();
  const auto params = zero_params(cfg);
  G g;
  CG cg(g, cfg, params);
  const auto latent = cg.extract_latent(random_batch(cfg, 3, 1));
  for (double v : g.value(latent.z).span()) CHECK(v == 0.0);
  const auto gauss = cg.variational_encode(latent);
  for (double v : g.value(gauss.mu).span()) CHECK(v == 0.0);
  for (double v : g.value(gauss.sigma).span()) CHECK(v == 1.0);
  for (std::size_t k : cfg.heads) {
    const auto s = cg.encode_symbols(latent.z, latent.snr_in, k);
    CHECK(g.value(s).cols() == 2 * k);
    for (double v : g.value(s).span()) CHECK(v == 0.0);
    for (double v : g.value(cg.decode(s)).span()) CHECK(v == 0.0);
  }
}

TEST_CASE("sigma logit: ln 2 gives 2, -100 clamps to the floor, +100 to the ceiling") {
  const auto cfg = small_config();
  auto params = zero_params(cfg);
  auto& b = params.at("fshat").biases;
  const std::size_t w = cfg.latent_width();
  b[w] = std::log(2.0);
  b[w + 1] = -100.0;
  b[w + 2] = 100.0;
  b[0] = 0.25;
  G g;
  CG cg(g, cfg, params);
  const auto gauss = cg.variational_encode(cg.extract_latent(random_batch(cfg, 1, 2)));
  CHECK(std::abs(g.value(gauss.sigma)[0] - 2.0) <= 1e-15);
  CHECK(g.value(gauss.sigma)[1] == kSigmaMin);
  CHECK(g.value(gauss.sigma)[2] == kSigmaMax);
  CHECK(g.value(gauss.mu)[0] == 0.25);

  // sigma at the floor: a sample equals mu to within 1e-5
  std::vector<double> eps_vals(w, 3.0);
  const auto sample = cg.reparameterize(gauss, Tensor<double>({1, w}, eps_vals));
  CHECK(std::abs(g.value(sample)[1] - g.value(gauss.mu)[1]) <= 1e-5);
  CHECK_THROWS_AS(cg.reparameterize(gauss, Tensor<double>({1, w + 1})), ConfigError);
}

TEST_CASE("toy network matches a hand-expanded evaluation") {
  const auto cfg = toy_config();
  const auto params = init_codec_params<double>(cfg);
  const double a = cfg.leaky_slope;
  using nn::Activation;
  for (int probe = 0; probe < 2; ++probe) {
    const std::vector<double> x = probe == 0 ? std::vector<double>{1, 0} : std::vector<double>{0, 1};
    const std::vector<double> imu{0.5, -0.25, 0.125, 1.0};
    const double snr_db = 12.0;
    CodecBatch<double> batch{Tensor<double>({1, 2}, x), Tensor<double>({1, 4}, imu),
                             Tensor<double>({1, 1}, {snr_db})};

    const auto vis = dense(params.at("fz.visual"), x, Activation::kLeakyRelu, a);
    const auto i1 = dense(params.at("fz.imu1"), imu, Activation::kLeakyRelu, a);
    const auto i2 = dense(params.at("fz.imu2"), i1, Activation::kLeakyRelu, a);
    const double c = snr_db * 0.1;
    const auto h = dense(params.at("fz.fc1"), cat(cat(vis, i2), {c}), Activation::kLeakyRelu, a);
    const auto z = dense(params.at("fz.fc2"), h, Activation::kLeakyRelu, a);
    const auto raw = dense(params.at("fshat"), cat(z, {c}), Activation::kIdentity, a);
    const auto head = dense(params.at("fs.head2"), cat(z, {c}), Activation::kTanh, a);
    std::vector<double> s = head;
    for (std::size_t j = 0; j < s.size(); j += 2) {
      const double m = std::hypot(s[j], s[j + 1]);
      if (m > 1) s[j] /= m, s[j + 1] /= m;
    }
    const auto d1 = dense(params.at("fd.fc1"), s, Activation::kLeakyRelu, a);
    const auto pose = dense(params.at("fd.fc2"), d1, Activation::kIdentity, a);

    G g;
    CG cg(g, cfg, params);
    const auto latent = cg.extract_latent(batch);
    const auto gauss = cg.variational_encode(latent);
    const auto sym = cg.encode_symbols(latent.z, latent.snr_in, 2);
    const auto out = cg.decode(sym);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(g.value(latent.z)[i] - z[i]) <= 1e-15);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(g.value(gauss.mu)[i] - raw[i]) <= 1e-15);
      CHECK(std::abs(g.value(gauss.sigma)[i] - std::exp(raw[4 + i])) <= 1e-14);
      CHECK(std::abs(g.value(sym)[i] - s[i]) <= 1e-15);
    }
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(g.value(out)[i] - pose[i]) <= 1e-14);
  }
}

TEST_CASE("forward pass is deterministic") {
  const auto cfg = small_config();
  const auto params = init_codec_params<double>(cfg);
  const auto batch = random_batch(cfg, 4, 3);
  Tensor<double> first;
  for (int rep = 0; rep < 2; ++rep) {
    G g;
    CG cg(g, cfg, params);
    const auto l = cg.extract_latent(batch);
    const auto out = g.value(cg.decode(cg.encode_symbols(l.z, l.snr_in, 12)));
    if (rep == 0) first = out;
    else CHECK(out == first);
  }
}

TEST_CASE("encode cost is strictly increasing in k") {
  const CodecConfig cfg;  // default K and k_M = 512
  const auto params = init_codec_params<float>(cfg);
  CodecBatch<float> batch{Tensor<float>({1, cfg.feature_dim}), Tensor<float>({1, kImuDim}),
                          Tensor<float>({1, 1})};
  std::uint64_t prev = 0;
  for (std::size_t k : cfg.heads) {
    nn::Graph<float> g;
    CodecGraph<float> cg(g, cfg, params);
    const auto l = cg.extract_latent(batch);
    const auto before = g.flops();
    cg.encode_symbols(l.z, l.snr_in, k);
    const auto cost = g.flops() - before;
    CAPTURE(k);
    CHECK(cost > prev);
    prev = cost;
  }
}

TEST_CASE("symbols respect the power constraint for every head and parameter draw") {
  auto cfg = small_config();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.seed = seed;
    auto params = init_codec_params<double>(cfg);
    // inflate the heads so tanh saturates
    for (std::size_t k : cfg.heads) {
      auto& w = params.at(head_name(k)).weights;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] *= 50.0;
    }
    G g;
    CG cg(g, cfg, params);
    const auto l = cg.extract_latent(random_batch(cfg, 64, seed));
    for (std::size_t k : cfg.heads) {
      const auto& s = g.value(cg.encode_symbols(l.z, l.snr_in, k));
      for (std::size_t j = 0; j < s.size(); j += 2) worst = std::max(worst, std::hypot(s[j], s[j + 1]));
    }
  }
  CHECK(worst <= 1.0 + 1e-9);
  CHECK(worst > 0.99);
}

TEST_CASE("unknown head is a policy error; oversized block is a framing error") {
  const auto cfg = small_config();
  const auto params = init_codec_params<double>(cfg);
  G g;
  CG cg(g, cfg, params);
  const auto l = cg.extract_latent(random_batch(cfg, 1, 1));
  CHECK_THROWS_AS(cg.encode_symbols(l.z, l.snr_in, 6), PolicyError);
  CHECK_THROWS_AS(cg.decode(g.constant(Tensor<double>({1, 34}))), FramingError);
  CHECK_THROWS_AS(cg.decode(g.constant(Tensor<double>({1, 7}))), FramingError);
  CodecBatch<double> bad = random_batch(cfg, 1, 1);
  bad.features = Tensor<double>({1, 3});
  CHECK_THROWS_AS(cg.extract_latent(bad), ConfigError);
}

TEST_CASE("k = 64 block reaches the decoder with 896 trailing zeros") {
  const CodecConfig cfg;
  const auto params = init_codec_params<float>(cfg);
  nn::Graph<float> g;
  CodecGraph<float> cg(g, cfg, params);
  std::vector<float> block(128, 0.5f);
  cg.decode(g.constant(Tensor<float>({1, 128}, block)));
  bool found = false;
  for (std::uint32_t id = 0; id < g.node_count(); ++id) {
    const nn::Graph<float>::Var v{id};
    if (g.op_name(v) != "pad_cols") continue;
    found = true;
    const auto& x = g.value(v);
    REQUIRE(x.cols() == 1024);
    std::size_t trailing = 0;
    for (std::size_t j = x.cols(); j-- > 0 && x[j] == 0.0f;) ++trailing;
    CHECK(trailing == 896);
  }
  CHECK(found);
}

TEST_CASE("decoding a k-block equals decoding its zero extension") {
  const auto cfg = small_config();
  const auto params = init_codec_params<double>(cfg);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t k : cfg.heads) {
    Tensor<double> block({2, 2 * k}), full({2, 2 * cfg.k_max});
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < 2 * k; ++j) full.at(r, j) = block.at(r, j) = u(rng);
    G g;
    CG cg(g, cfg, params);
    const Tensor<double> short_out = g.value(cg.decode(g.constant(block)));
    CHECK(short_out == g.value(cg.decode(g.constant(full))));
  }
}

TEST_CASE("reparameterize: moments and gradient") {
  const auto cfg = toy_config();
  auto params = zero_params(cfg);
  auto& b = params.at("fshat").biases;
  for (std::size_t i = 0; i < 4; ++i) {
    b[i] = 0.3 * (i + 1);
    b[4 + i] = std::log(2.0);
  }
  const std::size_t n = 100000;
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = 1000 + i;
  const auto eps = standard_normal_rows<double>(seeds, 4);
  CHECK(standard_normal_rows<double>(seeds, 4) == eps);

  G g;
  CG cg(g, cfg, params);
  CodecBatch<double> batch{Tensor<double>({n, 2}), Tensor<double>({n, 4}), Tensor<double>({n, 1})};
  const auto gauss = cg.variational_encode(cg.extract_latent(batch));
  const auto& s = g.value(cg.reparameterize(gauss, eps));
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += s.at(r, c);
    mean /= n;
    for (std::size_t r = 0; r < n; ++r) var += (s.at(r, c) - mean) * (s.at(r, c) - mean);
    var /= n - 1;
    CHECK(std::abs(mean - 0.3 * (c + 1)) <= 3 * 2.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 4.0) <= 0.05);
  }

  // d(sum(sample * R))/d mu = R and /d sigma = eps * R, checked by central differences
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<double> mu({2, 4}), sigma({2, 4}, 1.5), e({2, 4}), R({2, 4});
  for (std::size_t i = 0; i < 8; ++i) mu[i] = u(rng), e[i] = u(rng), R[i] = u(rng);
  auto loss = [&](const Tensor<double>& m, const Tensor<double>& sg, Tensor<double>* gm) {
    G gg;
    CG c2(gg, cfg, params);
    const auto mv = gg.variable(m), sv = gg.variable(sg);
    const auto l = gg.sum(gg.mul(c2.reparameterize({mv, sv}, e), gg.constant(R)));
    if (gm) {
      gg.backward(l);
      *gm = gg.grad(mv);
      for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(gg.grad(sv)[i] - e[i] * R[i]) <= 1e-15);
    }
    return gg.value(l)[0];
  };
  Tensor<double> gm;
  loss(mu, sigma, &gm);
  for (std::size_t i = 0; i < 8; ++i) {
    Tensor<double> p = mu, m = mu;
    p[i] += 1e-6;
    m[i] -= 1e-6;
    const double fd = (loss(p, sigma, nullptr) - loss(m, sigma, nullptr)) / 2e-6;
    CHECK(std::abs(gm[i] - R[i]) <= 1e-15);
    CHECK(std::abs(fd - R[i]) <= 1e-8);
  }
}

TEST_CASE("gradients touch only the selected head") {
  const auto cfg = small_config();
  const auto params = init_codec_params<double>(cfg);
  for (std::size_t chosen : cfg.heads) {
    G g;
    CG cg(g, cfg, params);
    const auto l = cg.extract_latent(random_batch(cfg, 5, chosen));
    const auto out = cg.decode(cg.encode_symbols(l.z, l.snr_in, chosen));
    g.backward(g.sum(g.mul(out, out)));
    auto grads = params.zeros_like();
    g.accumulate_param_grads(grads);
    for (std::size_t k : cfg.heads) {
      double mass = 0.0;
      for (double v : grads.at(head_name(k)).weights.span()) mass += std::abs(v);
      CAPTURE(k);
      if (k == chosen) CHECK(mass > 0.0);
      else CHECK(mass == 0.0);
    }
  }
}
