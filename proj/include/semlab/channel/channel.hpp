// SPDX-License-Identifier: Apache-2.0
//
// Symbol blocks are 2k interleaved reals (re, im). Noise variance per complex
// symbol is 1/SNR, split evenly over the two real components.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace semlab::channel {

inline constexpr double kAirtimeMsPerSymbol = 1.54e-4;
inline constexpr double kDefaultNoiseFloorDbm = -90.0;

struct ChannelState {
  double rsrp_dbm = 0.0;
  double snr_linear = 1.0;

  double snr_db() const;
  static ChannelState from_rsrp(double rsrp_dbm, double noise_floor_dbm = kDefaultNoiseFloorDbm);
};

/// Scales each complex symbol by min(1, 1/|s|). Odd length -> FramingError.
std::vector<double> power_normalize(std::span<const double> raw);
void power_normalize_inplace(std::span<double> block);

double feedback_to_snr(double rsrp_dbm, double noise_floor_dbm = kDefaultNoiseFloorDbm);
double linear_to_db(double linear);

/// The additive term alone: n_reals values with variance 1/(2 snr) each.
std::vector<double> awgn_noise(std::size_t n_reals, double snr_linear, std::uint64_t seed);

/// s + n. `noiseless` returns the block unchanged without touching the SNR.
std::vector<double> awgn_transmit(std::span<const double> block, double snr_linear,
                                  std::uint64_t seed, bool noiseless = false);

double transmission_time_ms(std::size_t k, double ms_per_symbol = kAirtimeMsPerSymbol);

struct LatencyModel {
  std::map<std::size_t, double> enc_ms;
  double dec_ms = 0.0;
  double airtime_ms_per_symbol = kAirtimeMsPerSymbol;

  /// enc_ms non-decreasing over sorted k, every entry > 0 (dec_ms >= 0).
  void validate() const;
  std::string to_json() const;
  static LatencyModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static LatencyModel load(const std::filesystem::path& path);
};

/// enc_ms(k) + airtime(k) + dec_ms. Unknown k -> ConfigError.
double e2e_latency_ms(std::size_t k, const LatencyModel& model);

/// Pool-adjacent-violators fit with unit weights; output is non-decreasing.
std::vector<double> isotonic_nondecreasing(std::span<const double> values);

/// Monotonic clock in milliseconds.
using Clock = std::function<double()>;
Clock steady_clock_ms();

struct CalibrationProbe {
  std::function<void(std::size_t k)> encode;
  std::function<void()> decode;
};

/// Median wall time per k over `repetitions` (>= 3), then isotonic smoothing.
LatencyModel calibrate_latency(std::span<const std::size_t> ks, const CalibrationProbe& probe,
                               int repetitions, const Clock& clock = steady_clock_ms());

struct TraceEntry {
  std::size_t sample_index = 0;
  double rsrp_dbm = 0.0;
};
/// CSV with header "sample_index,rsrp_dbm".
std::vector<TraceEntry> read_snr_trace(const std::filesystem::path& path);

}  // namespace semlab::channel
