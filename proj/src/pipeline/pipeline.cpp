// SPDX-License-Identifier: Apache-2.0
#include "semlab/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semlab/numerics/adam.hpp"
#include "semlab/util/blob_io.hpp"
#include "semlab/util/seed.hpp"

namespace semlab::pipeline {

namespace {

using FGraph = nn::Graph<float>;
using FCodec = codec::CodecGraph<float>;

constexpr std::uint64_t kShuffleStream = 0x5a1;
constexpr std::uint64_t kEpsStream = 0xe95;
constexpr std::uint64_t kNoiseStream = 0xa3c;

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

template <class Records>
codec::CodecBatch<float> make_batch(const Records& recs, std::size_t feature_dim) {
  const std::size_t n = recs.size();
  codec::CodecBatch<float> b{nn::Tensor<float>({n, feature_dim}), nn::Tensor<float>({n, 4}),
                             nn::Tensor<float>({n, 1})};
  for (std::size_t i = 0; i < n; ++i) {
    const data::SampleRecord& r = recs[i];
    if (r.features.size() != feature_dim)
      throw ConfigError("sample " + std::to_string(r.index) + " has " +
                        std::to_string(r.features.size()) + " features, codec expects " +
                        std::to_string(feature_dim));
    for (std::size_t f = 0; f < feature_dim; ++f)
      b.features.at(i, f) = static_cast<float>(r.features[f]);
    for (int c = 0; c < 4; ++c) b.imu.at(i, c) = static_cast<float>(r.imu[c]);
    b.snr_db.at(i, 0) = static_cast<float>(channel::linear_to_db(r.snr_linear));
  }
  return b;
}

template <class Records>
vib::PoseTargets<float> make_targets(const Records& recs) {
  const std::size_t n = recs.size();
  vib::PoseTargets<float> t{nn::Tensor<float>({n, 3}), nn::Tensor<float>({n, 4})};
  for (std::size_t i = 0; i < n; ++i) {
    const data::SampleRecord& r = recs[i];
    for (int c = 0; c < 3; ++c) t.position.at(i, c) = static_cast<float>(r.pose.position[c]);
    const auto q = r.pose.orientation.as_array();
    for (int c = 0; c < 4; ++c) t.quat.at(i, c) = static_cast<float>(q[c]);
  }
  return t;
}

/// Records by reference, gathered from index lists without copying.
struct RecordView {
  const data::Dataset* ds;
  std::span<const std::size_t> idx;
  std::size_t size() const { return idx.size(); }
  const data::SampleRecord& operator[](std::size_t i) const { return ds->records.at(idx[i]); }
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_head_routing(const nn::ParamSet<float>& grads, const codec::CodecConfig& cfg,
                        const std::set<std::size_t>& used, std::size_t step) {
  for (std::size_t k : cfg.heads) {
    if (used.contains(k)) continue;
    const auto& g = grads.at(codec::head_name(k));
    for (std::size_t i = 0; i < g.weights.size(); ++i)
      if (g.weights[i] != 0.0f)
        throw NumericError("step " + std::to_string(step) + ": unselected head " +
                           codec::head_name(k) + " received a gradient");
  }
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& dir) {
  nn::save_checkpoint(model.params, dir, "{\"codec\": " + model.codec.to_json() + "}");
  model.latency.save(dir / "latency.json");
}

Model load_model(const std::filesystem::path& dir) {
  auto loaded = nn::load_checkpoint(dir);
  Model m;
  try {
    const auto meta = nlohmann::json::parse(loaded.metadata_json);
    m.codec = codec::CodecConfig::from_json(meta.at("codec").dump());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + ": checkpoint lacks a codec description: " + e.what());
  }
  codec::require_codec_layout(m.codec, loaded.params);
  m.params = std::move(loaded.params);
  m.latency = channel::LatencyModel::load(dir / "latency.json");
  return m;
}

policy::PolicyConfig make_policy(const Model& model, const TrainConfig& cfg) {
  policy::PolicyConfig p;
  p.gamma = cfg.weights.gamma;
  p.tau_th_ms = cfg.tau_th_ms;
  p.ks = model.codec.heads;
  p.latency = model.latency;
  p.validate();
  return p;
}

std::vector<InferenceRecord> infer_batch(const Model& model,
                                         std::span<const data::SampleRecord> records,
                                         const policy::PolicyConfig& policy,
                                         const InferenceOptions& opts) {
  policy.validate();
  for (std::size_t k : policy.ks)
    if (!model.codec.heads.contains(k))
      throw PolicyError("policy offers k=" + std::to_string(k) + " but the codec has no such head");
  std::vector<InferenceRecord> out;
  out.reserve(records.size());
  const std::size_t bs = std::max<std::size_t>(1, opts.batch_size);
  for (std::size_t start = 0; start < records.size(); start += bs) {
    const auto chunk = records.subspan(start, std::min(bs, records.size() - start));
    const double t0 = now_ms();
    FGraph g;
    FCodec cg(g, model.codec, model.params);
    const auto latent = cg.extract_latent(make_batch(chunk, model.codec.feature_dim));
    const auto gauss = cg.variational_encode(latent);
    const auto& kl = g.value(g.kl_standard_normal(gauss.mu, gauss.sigma));

    vib::ChannelPlan plan;
    plan.noiseless = opts.noiseless;
    const std::size_t first = out.size();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      InferenceRecord rec;
      rec.sample_id = chunk[i].index;
      rec.kl_nats = std::max(0.0, static_cast<double>(kl[i]));
      rec.kbar = policy::estimate_kbar(rec.kl_nats, policy.gamma);
      rec.k_star = policy::select_k(rec.kbar, policy);
      rec.snr_db = channel::linear_to_db(chunk[i].snr_linear);
      rec.enc_ms = model.latency.enc_ms.at(rec.k_star);
      rec.dec_ms = model.latency.dec_ms;
      rec.e2e_ms = channel::e2e_latency_ms(rec.k_star, model.latency);
      plan.k.push_back(rec.k_star);
      plan.snr_linear.push_back(chunk[i].snr_linear);
      plan.noise_seed.push_back(util::derive_seed(opts.seed, kNoiseStream, chunk[i].index));
      out.push_back(rec);
    }
    const auto [pos, quat] = cg.split_pose(vib::channel_path(cg, latent, plan));
    const auto& P = g.value(pos);
    const auto& Q = g.value(quat);
    const double per_sample_ms = (now_ms() - t0) / static_cast<double>(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      auto& rec = out[first + i];
      rec.position = {P.at(i, 0), P.at(i, 1), P.at(i, 2)};
      rec.orientation = geo::normalized({Q.at(i, 0), Q.at(i, 1), Q.at(i, 2), Q.at(i, 3)});
      rec.measured_ms = per_sample_ms;
      rec.position_error_m = geo::distance(rec.position, chunk[i].pose.position);
      rec.orientation_error_deg =
          geo::angular_distance_deg(rec.orientation, chunk[i].pose.orientation);
    }
  }
  return out;
}

InferenceRecord infer(const Model& model, const data::SampleRecord& record,
                      const policy::PolicyConfig& policy, const InferenceOptions& opts) {
  return infer_batch(model, std::span(&record, 1), policy, opts).front();
}

MetricsReport summarize(std::vector<InferenceRecord> rows) {
  if (rows.empty()) throw ConfigError("cannot summarize an empty evaluation");
  MetricsReport r;
  for (const auto& row : rows) {
    r.position_mae_m += row.position_error_m;
    r.orientation_err_deg += row.orientation_error_deg;
    r.mean_k += static_cast<double>(row.k_star);
    r.enc_ms += row.enc_ms;
    r.dec_ms += row.dec_ms;
    r.e2e_ms += row.e2e_ms;
  }
  const double n = static_cast<double>(rows.size());
  for (double* v : {&r.position_mae_m, &r.orientation_err_deg, &r.mean_k, &r.enc_ms, &r.dec_ms,
                    &r.e2e_ms})
    *v /= n;
  r.rows = std::move(rows);
  return r;
}

MetricsReport evaluate(const Model& model, const data::Dataset& ds,
                       std::span<const std::size_t> indices, const policy::PolicyConfig& policy,
                       const InferenceOptions& opts) {
  if (indices.empty()) throw ConfigError("evaluation split is empty");
  std::vector<data::SampleRecord> recs;
  recs.reserve(indices.size());
  for (std::size_t i : indices) recs.push_back(ds.records.at(i));
  return summarize(infer_batch(model, recs, policy, opts));
}

channel::LatencyModel calibrate_model(const codec::CodecConfig& cfg,
                                      const nn::ParamSet<float>& params, int repetitions) {
  codec::CodecBatch<float> one{nn::Tensor<float>({1, cfg.feature_dim}, 0.5f),
                               nn::Tensor<float>({1, 4}), nn::Tensor<float>({1, 1}, 30.0f)};
  one.imu[0] = 1.0f;
  const nn::Tensor<float> received({1, cfg.latent_width()}, 0.1f);
  channel::CalibrationProbe probe;
  probe.encode = [&](std::size_t k) {
    FGraph g;
    FCodec cg(g, cfg, params);
    const auto latent = cg.extract_latent(one);
    const auto gauss = cg.variational_encode(latent);
    g.kl_standard_normal(gauss.mu, gauss.sigma);
    cg.encode_symbols(latent.z, latent.snr_in, k);
  };
  probe.decode = [&] {
    FGraph g;
    FCodec cg(g, cfg, params);
    cg.decode(g.constant(received));
  };
  // warm caches before timing
  probe.encode(cfg.heads.max());
  probe.decode();
  return channel::calibrate_latency(cfg.heads.values(), probe, repetitions);
}

TrainResult train(const TrainConfig& cfg, const data::Dataset& ds,
                  const std::filesystem::path& out_dir, const ProgressFn& progress) {
  cfg.validate();
  if (ds.manifest.feature_dim != cfg.codec.feature_dim)
    throw ConfigError("dataset has " + std::to_string(ds.manifest.feature_dim) +
                      " features, codec expects " + std::to_string(cfg.codec.feature_dim));
  const auto& train_idx = ds.manifest.splits.train;
  if (train_idx.empty()) throw ConfigError("training split is empty");

  auto params = codec::init_codec_params<float>(cfg.codec);
  const auto latency = calibrate_model(cfg.codec, params, cfg.calibration_repetitions);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    latency.save(out_dir / "latency.json");
  }
  auto grads = params.zeros_like();
  nn::AdamState<float> adam = nn::AdamState<float>::for_params(
      params, nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  const vib::KChooser chooser = [&](std::span<const double> kl) {
    std::vector<std::size_t> ks;
    for (double v : kl)
      ks.push_back(policy::training_k(policy::estimate_kbar(std::max(0.0, v), cfg.weights.gamma),
                                      cfg.codec.heads));
    return ks;
  };

  TrainResult result;
  result.best_val_position_mae = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  const std::size_t n = train_idx.size();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    std::mt19937_64 rng(util::derive_seed(cfg.seed, kShuffleStream, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(cfg.batch_size, n - start));
      const RecordView view{&ds, idx};
      ++step;
      std::vector<std::uint64_t> eps_seeds;
      vib::ChannelPlan plan;
      plan.noiseless = cfg.noiseless;
      for (std::size_t i : idx) {
        eps_seeds.push_back(
            util::derive_seed(util::derive_seed(cfg.seed, kEpsStream, epoch), i));
        plan.noise_seed.push_back(
            util::derive_seed(util::derive_seed(cfg.seed, kNoiseStream, epoch), i));
        plan.snr_linear.push_back(ds.records.at(i).snr_linear);
      }
      FGraph g;
      FCodec cg(g, cfg.codec, params);
      const auto eps = codec::standard_normal_rows<float>(eps_seeds, cfg.codec.latent_width());
      vib::TotalLoss<float> loss;
      try {
        loss = vib::total_loss(cg, make_batch(view, cfg.codec.feature_dim), make_targets(view),
                               eps, std::move(plan), chooser, cfg.weights);
        g.backward(loss.total);
      } catch (const NumericError& e) {
        throw NumericError("training step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch + 1) + "): " + e.what());
      }
      grads.set_zero();
      g.accumulate_param_grads(grads);
      const std::set<std::size_t> used(loss.k.begin(), loss.k.end());
      check_head_routing(grads, cfg.codec, used, step);
      nn::adam_step(params, grads, adam);

      LogRow row{step, loss.breakdown(g), 0.0};
      row.mean_k = std::accumulate(loss.k.begin(), loss.k.end(), 0.0) /
                   static_cast<double>(loss.k.size());
      result.log.push_back(row);
      epoch_total += row.loss.total;
      ++epoch_steps;
    }

    result.last = Model{cfg.codec, params, latency};
    if (!out_dir.empty()) save_model(result.last, out_dir / "last");
    std::ostringstream msg;
    msg << "epoch " << epoch + 1 << "/" << cfg.epochs << " mean total "
        << epoch_total / static_cast<double>(epoch_steps) << " mean k " << result.log.back().mean_k;
    const auto& val_idx = ds.manifest.splits.val;
    if (cfg.select_on_val && !val_idx.empty()) {
      InferenceOptions opts;
      opts.seed = cfg.seed;
      opts.noiseless = cfg.noiseless;
      opts.alpha = cfg.weights.alpha;
      const auto report = evaluate(result.last, ds, val_idx, make_policy(result.last, cfg), opts);
      msg << " val position MAE " << report.position_mae_m << " m, orientation "
          << report.orientation_err_deg << " deg, mean k " << report.mean_k;
      if (report.position_mae_m < result.best_val_position_mae) {
        result.best_val_position_mae = report.position_mae_m;
        result.best = result.last;
        result.best_epoch = epoch + 1;
        if (!out_dir.empty()) save_model(result.best, out_dir / "checkpoint");
      }
    } else {
      result.best = result.last;
      result.best_epoch = epoch + 1;
      if (!out_dir.empty()) save_model(result.best, out_dir / "checkpoint");
    }
    if (progress) progress(msg.str());
  }

  if (!out_dir.empty()) {
    write_train_log(result.log, out_dir / "train_log.csv");
    nlohmann::json s;
    s["epochs"] = cfg.epochs;
    s["steps"] = step;
    s["best_epoch"] = result.best_epoch;
    s["best_val_position_mae_m"] =
        std::isfinite(result.best_val_position_mae) ? result.best_val_position_mae : -1.0;
    s["initial_total_loss"] = result.log.front().loss.total;
    s["final_total_loss"] = result.log.back().loss.total;
    s["codec"] = nlohmann::json::parse(cfg.codec.to_json());
    util::write_text_file(out_dir / "summary.json", s.dump(2) + "\n");
  }
  return result;
}

void write_train_log(const std::vector<LogRow>& log, const std::filesystem::path& path) {
  std::ostringstream out;
  out.precision(9);
  out << "step,app,vib_recon,vib_kl,total,mean_k\n";
  for (const auto& r : log)
    out << r.step << ',' << r.loss.app_distortion << ',' << r.loss.vib_reconstruction << ','
        << r.loss.vib_kl << ',' << r.loss.total << ',' << r.mean_k << '\n';
  util::write_text_file(path, out.str());
}

namespace {
constexpr const char* kPolicyHeader =
    "sample_id,kl_nats,kbar,k_star,snr_db,e2e_ms,enc_ms,dec_ms,measured_ms,position_error_m,"
    "orientation_error_deg,px,py,pz,qw,qx,qy,qz";
}

void write_policy_csv(const std::vector<InferenceRecord>& rows, const std::filesystem::path& path) {
  std::ostringstream out;
  out.precision(10);
  out << kPolicyHeader << '\n';
  for (const auto& r : rows)
    out << r.sample_id << ',' << r.kl_nats << ',' << r.kbar << ',' << r.k_star << ','
        << r.snr_db << ',' << r.e2e_ms << ',' << r.enc_ms << ',' << r.dec_ms << ','
        << r.measured_ms << ',' << r.position_error_m << ',' << r.orientation_error_deg << ','
        << r.position[0] << ',' << r.position[1] << ',' << r.position[2] << ','
        << r.orientation.w << ',' << r.orientation.x << ',' << r.orientation.y << ','
        << r.orientation.z << '\n';
  util::write_text_file(path, out.str());
}

std::vector<InferenceRecord> read_policy_csv(const std::filesystem::path& path) {
  std::istringstream in(util::read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kPolicyHeader)
    throw IoError(path.string() + ": not an evaluation log (unexpected header)");
  std::vector<InferenceRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    try {
      while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (v.size() != 18)
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 18 columns");
    InferenceRecord r;
    r.sample_id = static_cast<std::size_t>(v[0]);
    r.kl_nats = v[1];
    r.kbar = v[2];
    r.k_star = static_cast<std::size_t>(v[3]);
    r.snr_db = v[4];
    r.e2e_ms = v[5];
    r.enc_ms = v[6];
    r.dec_ms = v[7];
    r.measured_ms = v[8];
    r.position_error_m = v[9];
    r.orientation_error_deg = v[10];
    r.position = {v[11], v[12], v[13]};
    r.orientation = {v[14], v[15], v[16], v[17]};
    rows.push_back(r);
  }
  return rows;
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::json j;
  j["samples"] = report.rows.size();
  j["position_mae_m"] = report.position_mae_m;
  j["orientation_err_deg"] = report.orientation_err_deg;
  j["mean_k"] = report.mean_k;
  j["enc_ms"] = report.enc_ms;
  j["dec_ms"] = report.dec_ms;
  j["e2e_ms"] = report.e2e_ms;
  return j.dump(2);
}

SweepResult sweep_fixed_k(const TrainConfig& base, const data::Dataset& ds,
                          std::span<const std::size_t> ks, std::span<const std::uint64_t> seeds,
                          const ProgressFn& progress) {
  if (ks.empty() || seeds.empty()) throw ConfigError("sweep needs at least one k and one seed");
  const codec::SymbolDimSet all(std::vector<std::size_t>(ks.begin(), ks.end()));
  // one shared latency table keeps the latency column comparable across runs
  codec::CodecConfig timing_cfg = base.codec;
  timing_cfg.heads = all;
  timing_cfg.k_max = std::max(base.codec.k_max, all.max());
  const auto latency = calibrate_model(timing_cfg, codec::init_codec_params<float>(timing_cfg),
                                       base.calibration_repetitions);
  SweepResult result;
  for (std::size_t k : all) {
    std::vector<double> mae, orient;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.codec.heads = codec::SymbolDimSet({k});
      cfg.codec.k_max = timing_cfg.k_max;
      cfg.codec.seed = seed;
      cfg.seed = seed;
      auto run = train(cfg, ds);
      run.best.latency.enc_ms = std::map<std::size_t, double>{{k, latency.enc_ms.at(k)}};
      run.best.latency.dec_ms = latency.dec_ms;
      InferenceOptions opts;
      opts.seed = seed;
      opts.noiseless = cfg.noiseless;
      opts.alpha = cfg.weights.alpha;
      const auto report = evaluate(run.best, ds, ds.manifest.splits.test,
                                   make_policy(run.best, cfg), opts);
      result.runs.push_back(SweepRow{k, seed, report.position_mae_m, report.orientation_err_deg,
                             channel::e2e_latency_ms(k, latency)});
      mae.push_back(report.position_mae_m);
      orient.push_back(report.orientation_err_deg);
      if (progress) {
        std::ostringstream msg;
        msg << "k=" << k << " seed=" << seed << " position MAE " << report.position_mae_m
            << " m, orientation " << report.orientation_err_deg << " deg";
        progress(msg.str());
      }
    }
    result.median.push_back(SweepRow{k, 0, median(mae), median(orient), channel::e2e_latency_ms(k, latency)});
  }
  return result;
}

void write_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path) {
  std::ostringstream out;
  out.precision(9);
  out << "k,position_mae_m,orientation_err_deg,e2e_ms\n";
  for (const auto& r : sweep.median)
    out << r.k << ',' << r.position_mae_m << ',' << r.orientation_err_deg << ',' << r.e2e_ms
        << '\n';
  util::write_text_file(path, out.str());
  std::ostringstream runs;
  runs.precision(9);
  runs << "k,seed,position_mae_m,orientation_err_deg,e2e_ms\n";
  for (const auto& r : sweep.runs)
    runs << r.k << ',' << r.seed << ',' << r.position_mae_m << ',' << r.orientation_err_deg
         << ',' << r.e2e_ms << '\n';
  auto runs_path = path;
  runs_path.replace_extension(".runs.csv");
  util::write_text_file(runs_path, runs.str());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

SnrReport snr_report(std::span<const InferenceRecord> rows, std::span<const double> edges,
                     std::size_t window) {
  if (edges.size() < 2) throw ConfigError("SNR report needs at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ConfigError("bin edges must be strictly increasing");
  if (window == 0) throw ConfigError("rolling window must be >= 1");
  SnrReport rep;
  const std::size_t nb = edges.size() - 1;
  std::vector<SnrBin> bins(nb);
  for (std::size_t b = 0; b < nb; ++b) bins[b].lo = edges[b], bins[b].hi = edges[b + 1];
  for (const auto& r : rows) {
    std::size_t b = nb;
    if (r.snr_db == edges.back())
      b = nb - 1;
    else if (r.snr_db >= edges.front() && r.snr_db < edges.back())
      b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), r.snr_db) -
                                   edges.begin()) - 1;
    if (b >= nb) continue;
    auto& bin = bins[b];
    ++bin.count;
    bin.mean_angular_deg += r.orientation_error_deg;
    bin.mean_k += static_cast<double>(r.k_star);
    bin.mean_position_error_m += r.position_error_m;
  }
  for (auto& bin : bins) {
    if (bin.count == 0) continue;
    const double c = static_cast<double>(bin.count);
    bin.mean_angular_deg /= c;
    bin.mean_k /= c;
    bin.mean_position_error_m /= c;
    rep.bins.push_back(bin);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    acc += static_cast<double>(rows[i].k_star);
    if (i >= window) acc -= static_cast<double>(rows[i - window].k_star);
    rep.rolling_mean_k.push_back(acc / static_cast<double>(std::min(i + 1, window)));
  }
  std::vector<double> snr, k;
  for (const auto& r : rows) {
    snr.push_back(r.snr_db);
    k.push_back(static_cast<double>(r.k_star));
  }
  rep.pearson_snr_k = pearson(snr, k);
  return rep;
}

void write_snr_report(const SnrReport& report, const std::filesystem::path& bins_csv,
                      const std::filesystem::path& rolling_csv) {
  std::ostringstream b;
  b.precision(9);
  b << "snr_lo_db,snr_hi_db,count,mean_angular_deg,mean_k,mean_position_error_m\n";
  for (const auto& bin : report.bins)
    b << bin.lo << ',' << bin.hi << ',' << bin.count << ',' << bin.mean_angular_deg << ','
      << bin.mean_k << ',' << bin.mean_position_error_m << '\n';
  util::write_text_file(bins_csv, b.str());
  std::ostringstream r;
  r.precision(9);
  r << "index,rolling_mean_k\n";
  for (std::size_t i = 0; i < report.rolling_mean_k.size(); ++i)
    r << i << ',' << report.rolling_mean_k[i] << '\n';
  util::write_text_file(rolling_csv, r.str());
}

Baselines reference_baselines(const data::Dataset& ds, std::span<const std::size_t> fit,
                              std::span<const std::size_t> score) {
  if (fit.empty() || score.empty()) throw ConfigError("baselines need non-empty splits");
  geo::Vec3 mean{0, 0, 0};
  for (std::size_t i : fit)
    for (int a = 0; a < 3; ++a) mean[a] += ds.records.at(i).pose.position[a];
  for (auto& m : mean) m /= static_cast<double>(fit.size());
  Baselines b;
  for (std::size_t i : score) {
    const auto& pose = ds.records.at(i).pose;
    b.mean_pose_position_mae_m += geo::distance(mean, pose.position);
    b.identity_orientation_err_deg += geo::angular_distance_deg(geo::Quat{}, pose.orientation);
  }
  b.mean_pose_position_mae_m /= static_cast<double>(score.size());
  b.identity_orientation_err_deg /= static_cast<double>(score.size());
  return b;
}

void dump_symbols(const Model& model, const data::Dataset& ds,
                  std::span<const std::size_t> indices, const policy::PolicyConfig& policy,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "sample_id,k,symbols...\n";
  for (std::size_t idx : indices) {
    const auto& rec = ds.records.at(idx);
    const std::array<const data::SampleRecord*, 1> one{&rec};
    const std::vector<data::SampleRecord> recs{rec};
    FGraph g;
    FCodec cg(g, model.codec, model.params);
    const auto latent = cg.extract_latent(make_batch(recs, model.codec.feature_dim));
    const auto gauss = cg.variational_encode(latent);
    const double kl = std::max(0.0, static_cast<double>(
                                        g.value(g.kl_standard_normal(gauss.mu, gauss.sigma))[0]));
    const std::size_t k = policy::select_k(policy::estimate_kbar(kl, policy.gamma), policy);
    const auto& s = g.value(cg.encode_symbols(latent.z, latent.snr_in, k));
    out << rec.index << ',' << k;
    for (std::size_t i = 0; i < s.size(); ++i) out << ',' << s[i];
    out << '\n';
    (void)one;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace semlab::pipeline
