// SPDX-License-Identifier: Apache-2.0
#include "semlab/channel/channel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "semlab/error.hpp"
#include "semlab/util/blob_io.hpp"

namespace semlab::channel {

double ChannelState::snr_db() const { return linear_to_db(snr_linear); }

ChannelState ChannelState::from_rsrp(double rsrp_dbm, double noise_floor_dbm) {
  return {rsrp_dbm, feedback_to_snr(rsrp_dbm, noise_floor_dbm)};
}

void power_normalize_inplace(std::span<double> block) {
  if (block.size() % 2 != 0)
    throw FramingError("symbol payload has odd length " + std::to_string(block.size()));
  for (std::size_t i = 0; i < block.size(); i += 2) {
    const double mag = std::hypot(block[i], block[i + 1]);
    if (mag > 1.0) {
      block[i] /= mag;
      block[i + 1] /= mag;
    }
  }
}

std::vector<double> power_normalize(std::span<const double> raw) {
  std::vector<double> out(raw.begin(), raw.end());
  power_normalize_inplace(out);
  return out;
}

double feedback_to_snr(double rsrp_dbm, double noise_floor_dbm) {
  return std::pow(10.0, (rsrp_dbm - noise_floor_dbm) / 10.0);
}

double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

std::vector<double> awgn_noise(std::size_t n_reals, double snr_linear, std::uint64_t seed) {
  if (!(snr_linear > 0.0) || !std::isfinite(snr_linear))
    throw ConfigError("SNR must be positive and finite, got " + std::to_string(snr_linear));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / snr_linear));
  std::vector<double> n(n_reals);
  for (auto& v : n) v = gauss(rng);
  return n;
}

std::vector<double> awgn_transmit(std::span<const double> block, double snr_linear,
                                  std::uint64_t seed, bool noiseless) {
  if (block.size() % 2 != 0)
    throw FramingError("symbol payload has odd length " + std::to_string(block.size()));
  std::vector<double> out(block.begin(), block.end());
  if (noiseless) return out;
  const auto n = awgn_noise(out.size(), snr_linear, seed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += n[i];
  return out;
}

double transmission_time_ms(std::size_t k, double ms_per_symbol) {
  return static_cast<double>(k) * ms_per_symbol;
}

void LatencyModel::validate() const {
  if (enc_ms.empty()) throw ConfigError("latency model has no encoder entries");
  if (!(dec_ms >= 0.0) || !std::isfinite(dec_ms))
    throw ConfigError("latency model dec_ms must be finite and >= 0");
  if (!(airtime_ms_per_symbol > 0.0)) throw ConfigError("airtime per symbol must be > 0");
  double prev = 0.0;
  for (const auto& [k, ms] : enc_ms) {
    if (!(ms > 0.0) || !std::isfinite(ms))
      throw ConfigError("latency model enc_ms[" + std::to_string(k) + "] must be > 0");
    if (ms < prev)
      throw ConfigError("latency model enc_ms decreases at k=" + std::to_string(k));
    prev = ms;
  }
}

std::string LatencyModel::to_json() const {
  nlohmann::json j;
  j["airtime_ms_per_symbol"] = airtime_ms_per_symbol;
  j["dec_ms"] = dec_ms;
  nlohmann::json enc = nlohmann::json::object();
  for (const auto& [k, ms] : enc_ms) enc[std::to_string(k)] = ms;
  j["enc_ms"] = enc;
  return j.dump(2);
}

LatencyModel LatencyModel::from_json(const std::string& text) {
  LatencyModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.airtime_ms_per_symbol = j.at("airtime_ms_per_symbol").get<double>();
    m.dec_ms = j.at("dec_ms").get<double>();
    for (const auto& [key, value] : j.at("enc_ms").items())
      m.enc_ms[std::stoul(key)] = value.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed latency model: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("malformed latency model key: ") + e.what());
  }
  m.validate();
  return m;
}

void LatencyModel::save(const std::filesystem::path& path) const {
  util::write_text_file(path, to_json() + "\n");
}

LatencyModel LatencyModel::load(const std::filesystem::path& path) {
  return from_json(util::read_text_file(path));
}

double e2e_latency_ms(std::size_t k, const LatencyModel& model) {
  auto it = model.enc_ms.find(k);
  if (it == model.enc_ms.end())
    throw ConfigError("latency model has no entry for k=" + std::to_string(k));
  return it->second + transmission_time_ms(k, model.airtime_ms_per_symbol) + model.dec_ms;
}

std::vector<double> isotonic_nondecreasing(std::span<const double> values) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean());
  return out;
}

Clock steady_clock_ms() {
  return [] {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
  };
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

LatencyModel calibrate_latency(std::span<const std::size_t> ks, const CalibrationProbe& probe,
                               int repetitions, const Clock& clock) {
  if (repetitions < 3)
    throw ConfigError("latency calibration needs at least 3 repetitions, got " +
                      std::to_string(repetitions));
  if (ks.empty()) throw ConfigError("latency calibration needs at least one k");
  std::vector<std::size_t> sorted(ks.begin(), ks.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> medians;
  for (std::size_t k : sorted) {
    std::vector<double> times;
    for (int r = 0; r < repetitions; ++r) {
      const double t0 = clock();
      probe.encode(k);
      times.push_back(clock() - t0);
    }
    medians.push_back(median(std::move(times)));
  }
  std::vector<double> dec_times;
  for (int r = 0; r < repetitions; ++r) {
    const double t0 = clock();
    probe.decode();
    dec_times.push_back(clock() - t0);
  }

  LatencyModel model;
  const auto smooth = isotonic_nondecreasing(medians);
  // timer resolution can report 0 for very fast stubs; entries must stay > 0
  for (std::size_t i = 0; i < sorted.size(); ++i)
    model.enc_ms[sorted[i]] = std::max(smooth[i], 1e-6);
  model.dec_ms = median(std::move(dec_times));
  model.validate();
  return model;
}

std::vector<TraceEntry> read_snr_trace(const std::filesystem::path& path) {
  std::istringstream in(util::read_text_file(path));
  std::string line;
  std::vector<TraceEntry> out;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find_first_of("0123456789-") != 0) continue;  // header
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      out.push_back({std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::logic_error&) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'sample_index,rsrp_dbm'");
    }
  }
  return out;
}

}  // namespace semlab::channel
