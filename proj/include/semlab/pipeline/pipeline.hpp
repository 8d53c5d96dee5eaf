// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semlab/channel/channel.hpp"
#include "semlab/codec/codec.hpp"
#include "semlab/data/dataset.hpp"
#include "semlab/pipeline/config.hpp"
#include "semlab/policy/policy.hpp"
#include "semlab/vib/loss.hpp"

namespace semlab::pipeline {

struct Model {
  codec::CodecConfig codec;
  nn::ParamSet<float> params;
  channel::LatencyModel latency;
};

/// Checkpoint directory: numerics manifest + blobs, codec config in the
/// metadata, latency.json alongside.
void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

struct LogRow {
  std::size_t step = 0;
  vib::LossBreakdown loss;
  double mean_k = 0.0;
};

struct InferenceRecord {
  std::size_t sample_id = 0;
  geo::Vec3 position{};
  geo::Quat orientation{};
  double kl_nats = 0.0;
  double kbar = 0.0;
  std::size_t k_star = 0;
  double snr_db = 0.0;
  double enc_ms = 0.0;
  double dec_ms = 0.0;
  /// Modeled enc + airtime + dec for k_star.
  double e2e_ms = 0.0;
  /// Wall time of the forward computation, amortized over its batch.
  double measured_ms = 0.0;
  double position_error_m = 0.0;
  double orientation_error_deg = 0.0;
};

struct InferenceOptions {
  bool noiseless = false;
  std::uint64_t seed = 1;
  std::size_t batch_size = 256;
  double alpha = 0.7;
};

/// Inference on records: latent -> KL -> k_bar -> k* (latency-constrained)
/// -> encode -> AWGN -> decode. Throws InfeasibleBudgetError when the budget
/// admits no k.
std::vector<InferenceRecord> infer_batch(const Model& model,
                                         std::span<const data::SampleRecord> records,
                                         const policy::PolicyConfig& policy,
                                         const InferenceOptions& opts);
InferenceRecord infer(const Model& model, const data::SampleRecord& record,
                      const policy::PolicyConfig& policy, const InferenceOptions& opts);

struct MetricsReport {
  double position_mae_m = 0.0;
  double orientation_err_deg = 0.0;
  double mean_k = 0.0;
  double enc_ms = 0.0;
  double dec_ms = 0.0;
  double e2e_ms = 0.0;
  std::vector<InferenceRecord> rows;
};

MetricsReport summarize(std::vector<InferenceRecord> rows);

/// Throws ConfigError on an empty index list.
MetricsReport evaluate(const Model& model, const data::Dataset& ds,
                       std::span<const std::size_t> indices, const policy::PolicyConfig& policy,
                       const InferenceOptions& opts);

policy::PolicyConfig make_policy(const Model& model, const TrainConfig& cfg);

/// Latency table for the model's heads, timed on single-sample requests.
channel::LatencyModel calibrate_model(const codec::CodecConfig& cfg,
                                      const nn::ParamSet<float>& params, int repetitions);

struct TrainResult {
  Model best;
  Model last;
  std::vector<LogRow> log;
  std::size_t best_epoch = 0;
  double best_val_position_mae = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Joint Adam training of all codec blocks. When `out_dir` is non-empty,
/// writes checkpoint/ (best on validation), last/, train_log.csv,
/// latency.json and summary.json. A non-finite loss aborts with the step
/// number; checkpoints already on disk are kept.
TrainResult train(const TrainConfig& cfg, const data::Dataset& ds,
                  const std::filesystem::path& out_dir = {}, const ProgressFn& progress = {});

void write_train_log(const std::vector<LogRow>& log, const std::filesystem::path& path);
void write_policy_csv(const std::vector<InferenceRecord>& rows, const std::filesystem::path& path);
std::vector<InferenceRecord> read_policy_csv(const std::filesystem::path& path);
std::string metrics_json(const MetricsReport& report);

struct SweepRow {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double position_mae_m = 0.0;
  double orientation_err_deg = 0.0;
  double e2e_ms = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> runs;    // one per (k, seed)
  std::vector<SweepRow> median;  // one per k, median over seeds
};

/// One training run per (k, seed) with a single head of width k and the
/// policy bypassed.
SweepResult sweep_fixed_k(const TrainConfig& base, const data::Dataset& ds,
                          std::span<const std::size_t> ks, std::span<const std::uint64_t> seeds,
                          const ProgressFn& progress = {});
void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path);

struct SnrBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_angular_deg = 0.0;
  double mean_k = 0.0;
  double mean_position_error_m = 0.0;
};

struct SnrReport {
  std::vector<SnrBin> bins;  // non-empty bins only
  std::vector<double> rolling_mean_k;
  double pearson_snr_k = 0.0;
};

/// Bins are [edges[i], edges[i+1]); the last bin also includes its upper edge.
SnrReport snr_report(std::span<const InferenceRecord> rows, std::span<const double> edges,
                     std::size_t window = 50);
void write_snr_report(const SnrReport& report, const std::filesystem::path& bins_csv,
                      const std::filesystem::path& rolling_csv);

/// Pearson correlation; NaN when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct Baselines {
  double mean_pose_position_mae_m = 0.0;
  double identity_orientation_err_deg = 0.0;
};
/// Constant predictors fitted on `fit` and scored on `score`.
Baselines reference_baselines(const data::Dataset& ds, std::span<const std::size_t> fit,
                              std::span<const std::size_t> score);

/// Writes (sample_id, k, 2k reals) rows of transmitted symbols.
void dump_symbols(const Model& model, const data::Dataset& ds,
                  std::span<const std::size_t> indices, const policy::PolicyConfig& policy,
                  const std::filesystem::path& path);

}  // namespace semlab::pipeline
