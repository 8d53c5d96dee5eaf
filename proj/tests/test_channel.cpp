// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "semlab/channel/channel.hpp"
#include "semlab/error.hpp"

using namespace semlab;
using namespace semlab::channel;

TEST_CASE("power_normalize: examples") {
  const auto a = power_normalize(std::vector<double>{3, 4});
  CHECK(std::abs(a[0] - 0.6) <= 1e-15);
  CHECK(std::abs(a[1] - 0.8) <= 1e-15);
  const auto b = power_normalize(std::vector<double>{0.3, 0.4, -2, 0});
  CHECK(b[0] == 0.3);
  CHECK(b[1] == 0.4);
  CHECK(b[2] == -1.0);
  CHECK(b[3] == 0.0);
  const auto z = power_normalize(std::vector<double>(8, 0.0));
  CHECK(z == std::vector<double>(8, 0.0));
  CHECK_THROWS_AS(power_normalize(std::vector<double>{1, 2, 3}), FramingError);
}

TEST_CASE("power constraint holds over 1e5 random blocks") {
  std::mt19937_64 rng(1);
  std::cauchy_distribution<double> wild(0.0, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    std::vector<double> raw(16);
    for (auto& x : raw) x = wild(rng);
    const auto s = power_normalize(raw);
    for (std::size_t j = 0; j < s.size(); j += 2) worst = std::max(worst, std::hypot(s[j], s[j + 1]));
  }
  CHECK(worst <= 1.0 + 1e-9);
}

TEST_CASE("AWGN noise power per complex symbol is 1/SNR") {
  for (double snr : {1.0, 10.0, 100.0}) {
    CAPTURE(snr);
    const std::size_t symbols = 1000000;
    const auto n = awgn_noise(2 * symbols, snr, 42);
    double power = 0.0, mean_re = 0.0, mean_im = 0.0, var_re = 0.0;
    for (std::size_t j = 0; j < symbols; ++j) {
      power += n[2 * j] * n[2 * j] + n[2 * j + 1] * n[2 * j + 1];
      mean_re += n[2 * j];
      mean_im += n[2 * j + 1];
      var_re += n[2 * j] * n[2 * j];
    }
    power /= symbols;
    CHECK(std::abs(power * snr - 1.0) <= 0.01);
    // even split across components, zero mean
    CHECK(std::abs(var_re / symbols * snr - 0.5) <= 0.01);
    CHECK(std::abs(mean_re / symbols) * std::sqrt(snr) <= 0.005);
    CHECK(std::abs(mean_im / symbols) * std::sqrt(snr) <= 0.005);
  }
}

TEST_CASE("awgn_transmit: determinism, noiseless flag, bad SNR") {
  const std::vector<double> s{0.1, 0.2, -0.3, 0.4};
  CHECK(awgn_transmit(s, 5.0, 9) == awgn_transmit(s, 5.0, 9));
  CHECK(awgn_transmit(s, 5.0, 9) != awgn_transmit(s, 5.0, 10));
  CHECK(awgn_transmit(s, 5.0, 9, true) == s);
  CHECK(awgn_transmit(s, 0.0, 9, true) == s);
  const auto y = awgn_transmit(s, 5.0, 9);
  const auto n = awgn_noise(4, 5.0, 9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == s[i] + n[i]);
  CHECK_THROWS_AS(awgn_transmit(s, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(awgn_transmit(s, -1.0, 1), ConfigError);
  CHECK_THROWS_AS(awgn_transmit(s, INFINITY, 1), ConfigError);
  CHECK_THROWS_AS(awgn_transmit(s, NAN, 1), ConfigError);
}

TEST_CASE("feedback_to_snr: examples and monotonicity") {
  CHECK(feedback_to_snr(-90.0, -90.0) == 1.0);
  CHECK(std::abs(feedback_to_snr(-80.0, -90.0) - 10.0) <= 1e-12);
  CHECK(std::abs(feedback_to_snr(-70.0, -90.0) - 100.0) <= 1e-12);
  CHECK(std::abs(feedback_to_snr(-70.0) - 100.0) <= 1e-12);
  double prev = 0.0;
  for (double r = -120.0; r <= -20.0; r += 0.5) {
    const double s = feedback_to_snr(r);
    CHECK(s > prev);
    prev = s;
  }
  const auto st = ChannelState::from_rsrp(-60.0);
  CHECK(std::abs(st.snr_db() - 30.0) <= 1e-12);
}

TEST_CASE("transmission_time_ms: examples") {
  CHECK(transmission_time_ms(0) == 0.0);
  CHECK(std::abs(transmission_time_ms(512) - 0.078848) <= 1e-15);
  CHECK(std::abs(transmission_time_ms(26) - 0.004004) <= 1e-15);
  // one 4 us OFDM symbol per 26 subcarriers
  CHECK(std::abs(transmission_time_ms(26) - 4e-3) <= 1e-5);
}

TEST_CASE("e2e_latency_ms: examples and unknown k") {
  LatencyModel zero;
  zero.enc_ms = {{512, 0.0}};
  CHECK(std::abs(e2e_latency_ms(512, zero) - 0.078848) <= 1e-15);
  LatencyModel m;
  m.enc_ms = {{64, 1.7}, {128, 1.8}};
  m.dec_ms = 0.44;
  CHECK(std::abs(e2e_latency_ms(64, m) - 2.149856) <= 1e-12);
  CHECK(e2e_latency_ms(64, m) <= e2e_latency_ms(128, m));
  CHECK_THROWS_AS(e2e_latency_ms(96, m), ConfigError);
}

TEST_CASE("isotonic_nondecreasing: pool adjacent violators") {
  const auto a = isotonic_nondecreasing(std::vector<double>{2.0, 1.9});
  CHECK(std::abs(a[0] - 1.95) <= 1e-15);
  CHECK(std::abs(a[1] - 1.95) <= 1e-15);
  // 1, [3, 2, 2] pooled to 7/3, then 5
  const auto b = isotonic_nondecreasing(std::vector<double>{1, 3, 2, 2, 5});
  CHECK(b[0] == 1.0);
  for (int i = 1; i <= 3; ++i) CHECK(std::abs(b[i] - 7.0 / 3.0) <= 1e-15);
  CHECK(b[4] == 5.0);
  const std::vector<double> sorted{0.1, 0.2, 0.2, 3.0};
  CHECK(isotonic_nondecreasing(sorted) == sorted);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + t % 9);
    for (auto& x : v) x = u(rng);
    const auto f = isotonic_nondecreasing(v);
    double sum_in = 0, sum_out = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      sum_in += v[i];
      sum_out += f[i];
      if (i) CHECK(f[i] >= f[i - 1]);
    }
    CHECK(std::abs(sum_in - sum_out) <= 1e-12);
  }
}

namespace {

// Deterministic clock advanced by the probe itself.
struct StubTimer {
  double now = 0.0;
  Clock clock() {
    return [this] { return now; };
  }
};

}  // namespace

TEST_CASE("calibrate_latency: constant-time stub") {
  StubTimer t;
  CalibrationProbe probe{[&](std::size_t) { t.now += 1.25; }, [&] { t.now += 0.5; }};
  const std::vector<std::size_t> ks{64, 128, 256};
  const auto m = calibrate_latency(ks, probe, 3, t.clock());
  for (auto k : ks) CHECK(m.enc_ms.at(k) == 1.25);
  CHECK(m.dec_ms == 0.5);
}

TEST_CASE("calibrate_latency: time proportional to k, with jitter and an outlier") {
  StubTimer t;
  int call = 0;
  CalibrationProbe probe{[&](std::size_t k) {
                           const double jitter = (call % 3 - 1) * 1e-4;
                           t.now += 0.01 * k + jitter + (call % 7 == 3 ? 50.0 : 0.0);
                           ++call;
                         },
                         [&] { t.now += 0.3; }};
  const std::vector<std::size_t> ks{64, 128, 192, 256};
  const auto m = calibrate_latency(ks, probe, 7, t.clock());
  for (auto k : ks) CHECK(std::abs(m.enc_ms.at(k) / (0.01 * k) - 1.0) <= 1e-3);
}

TEST_CASE("calibrate_latency: non-monotone raw timings are smoothed") {
  StubTimer t;
  CalibrationProbe probe{[&](std::size_t k) { t.now += k == 64 ? 2.0 : 1.9; }, [&] {}};
  const std::vector<std::size_t> ks{128, 64};
  const auto m = calibrate_latency(ks, probe, 3, t.clock());
  CHECK(std::abs(m.enc_ms.at(64) - 1.95) <= 1e-12);
  CHECK(std::abs(m.enc_ms.at(128) - 1.95) <= 1e-12);
}

TEST_CASE("calibrate_latency: errors") {
  CalibrationProbe probe{[](std::size_t) {}, [] {}};
  const std::vector<std::size_t> ks{64};
  CHECK_THROWS_AS(calibrate_latency(ks, probe, 2), ConfigError);
  CHECK_THROWS_AS(calibrate_latency({}, probe, 3), ConfigError);
}

TEST_CASE("calibrated latency is monotone with the real clock") {
  volatile double sink = 0;
  CalibrationProbe probe{[&](std::size_t k) {
                           for (std::size_t i = 0; i < 2000 * k; ++i) sink = sink + 1e-9;
                         },
                         [&] {}};
  const std::vector<std::size_t> ks{64, 128, 192, 256, 320};
  const auto m = calibrate_latency(ks, probe, 5);
  double prev = -1.0;
  for (auto k : ks) {
    const double e = e2e_latency_ms(k, m);
    CHECK(e >= prev);
    CHECK(m.enc_ms.at(k) > 0.0);
    prev = e;
  }
}

TEST_CASE("LatencyModel: validation and JSON round trip") {
  LatencyModel m;
  m.enc_ms = {{64, 1.5}, {128, 1.75}, {512, 2.5}};
  m.dec_ms = 0.44;
  const auto back = LatencyModel::from_json(m.to_json());
  CHECK(back.enc_ms == m.enc_ms);
  CHECK(back.dec_ms == m.dec_ms);
  CHECK(back.airtime_ms_per_symbol == m.airtime_ms_per_symbol);

  const auto dir = std::filesystem::temp_directory_path() / "semlab_test_latency";
  std::filesystem::create_directories(dir);
  m.save(dir / "latency.json");
  CHECK(LatencyModel::load(dir / "latency.json").enc_ms == m.enc_ms);

  LatencyModel bad = m;
  bad.enc_ms[128] = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = m;
  bad.enc_ms[64] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS(LatencyModel::from_json("{\"enc_ms\": 3}"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("read_snr_trace parses CSV and reports the bad line") {
  const auto dir = std::filesystem::temp_directory_path() / "semlab_test_trace";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "ok.csv");
    f << "sample_index,rsrp_dbm\n0,-55.5\n# comment\n3,-70\n";
  }
  const auto t = read_snr_trace(dir / "ok.csv");
  REQUIRE(t.size() == 2);
  CHECK(t[1].sample_index == 3);
  CHECK(t[1].rsrp_dbm == -70.0);
  {
    std::ofstream f(dir / "bad.csv");
    f << "sample_index,rsrp_dbm\n0,-55.5\nfoo\n";
  }
  try {
    read_snr_trace(dir / "bad.csv");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
  CHECK_THROWS_AS(read_snr_trace(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
