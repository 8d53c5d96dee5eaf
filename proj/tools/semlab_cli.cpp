// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "semlab/pipeline/pipeline.hpp"
#include "semlab/simd/kernels.hpp"
#include "semlab/util/blob_io.hpp"

using namespace semlab;

namespace {

pipeline::RunConfig load_config(const std::string& path) {
  return path.empty() ? pipeline::RunConfig{} : pipeline::load_run_config(path);
}

void log_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw ConfigError("expected a comma-separated list of numbers, got '" + text + "'");
    }
  }
  return out;
}

const std::vector<std::size_t>& split_indices(const data::Dataset& ds, const std::string& name) {
  if (name == "train") return ds.manifest.splits.train;
  if (name == "val") return ds.manifest.splits.val;
  if (name == "test") return ds.manifest.splits.test;
  throw ConfigError("unknown split '" + name + "' (train, val, test)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semlab: adaptive-rate semantic pose transmission lab"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "Force kernel set (scalar, avx2, neon)");

  std::string config, out, data_dir, checkpoint, report, log_path, bins = "0,10,20,30,40,50,60,70";
  std::string split_name = "test", k_list = "64,256,512", seeds = "1,2,3", trace;
  std::uint64_t seed = 0;
  std::size_t samples = 0, window = 50, limit = 100;
  double tau_th = 0.0;
  bool noiseless = false;
  int repetitions = 7;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--seed", seed, "Scene/trajectory seed (overrides config)");
  gen->add_option("--samples", samples, "Number of samples (overrides config)");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--config", config, "Config file");

  auto* tr = app.add_subcommand("train", "Train the codec");
  tr->add_option("--config", config, "Config file");
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint with the adaptive policy");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--report", report, "Output prefix for <prefix>.csv and <prefix>.json")
      ->required();
  ev->add_option("--config", config, "Config file (gamma, tau_th_ms, seed)");
  ev->add_option("--split", split_name, "train, val or test");
  ev->add_option("--tau-th", tau_th, "Latency budget in ms (overrides config)");
  ev->add_option("--snr-trace", trace, "CSV of sample_index,rsrp_dbm replacing stored RSRP");
  ev->add_flag("--noiseless", noiseless, "Ideal channel");

  auto* sw = app.add_subcommand("sweep", "Fixed-k rate-distortion sweep");
  sw->add_option("--k-list", k_list, "Comma-separated symbol counts");
  sw->add_option("--seeds", seeds, "Comma-separated seeds");
  sw->add_option("--data", data_dir, "Dataset directory")->required();
  sw->add_option("--out", out, "Output CSV")->required();
  sw->add_option("--config", config, "Config file");

  auto* rp = app.add_subcommand("report", "SNR-binned report from an evaluation log");
  rp->add_option("--log", log_path, "Evaluation CSV written by eval")->required();
  rp->add_option("--bins", bins, "Comma-separated SNR bin edges in dB");
  rp->add_option("--window", window, "Rolling-mean window over samples");
  rp->add_option("--out", out, "Output prefix (default: next to the log)");

  auto* cal = app.add_subcommand("calibrate", "Re-measure the latency table of a checkpoint");
  cal->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  cal->add_option("--repetitions", repetitions, "Timed repetitions per k");

  auto* dump = app.add_subcommand("dump-symbols", "Write transmitted symbols as CSV");
  dump->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  dump->add_option("--data", data_dir, "Dataset directory")->required();
  dump->add_option("--out", out, "Output CSV")->required();
  dump->add_option("--limit", limit, "Number of test samples");
  dump->add_option("--config", config, "Config file (gamma, tau_th_ms)");

  auto* exp = app.add_subcommand("export-csv", "Dump a dataset as CSV");
  exp->add_option("--data", data_dir, "Dataset directory")->required();
  exp->add_option("--out", out, "Output CSV")->required();

  auto* cfg_cmd = app.add_subcommand("print-config", "Print every config key with defaults");
  cfg_cmd->add_option("--config", config, "Config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (!isa.empty()) {
      if (isa == "scalar") simd::set_active_isa(simd::Isa::kScalar);
      else if (isa == "avx2") simd::set_active_isa(simd::Isa::kAvx2);
      else if (isa == "neon") simd::set_active_isa(simd::Isa::kNeon);
      else throw ConfigError("unknown ISA '" + isa + "'");
    }

    if (*gen) {
      auto cfg = load_config(config);
      if (gen->count("--seed")) cfg.scene.seed = seed;
      if (gen->count("--samples")) cfg.samples = samples;
      const auto ds = data::generate_dataset(cfg.scene, cfg.samples);
      data::save_dataset(ds, out);
      log_line("wrote " + std::to_string(ds.manifest.count) + " samples to " + out);
    } else if (*tr) {
      const auto cfg = load_config(config);
      const auto ds = data::load_dataset(data_dir);
      log_line(std::string("kernels: ") + std::string(simd::isa_name(simd::active_isa())));
      const auto result = pipeline::train(cfg.train, ds, out, log_line);
      util::write_text_file(std::filesystem::path(out) / "config.txt",
                            pipeline::dump_run_config(cfg));
      log_line("best epoch " + std::to_string(result.best_epoch) + ", checkpoint in " + out +
               "/checkpoint");
    } else if (*ev) {
      const auto cfg = load_config(config);
      const auto model = pipeline::load_model(checkpoint);
      auto ds = data::load_dataset(data_dir);
      if (!trace.empty()) {
        for (const auto& e : channel::read_snr_trace(trace)) {
          if (e.sample_index >= ds.records.size())
            throw ConfigError("trace index " + std::to_string(e.sample_index) + " out of range");
          auto& r = ds.records[e.sample_index];
          r.rsrp_dbm = e.rsrp_dbm;
          r.snr_linear = channel::feedback_to_snr(e.rsrp_dbm, cfg.scene.noise_floor_dbm);
        }
      }
      auto tcfg = cfg.train;
      if (ev->count("--tau-th")) tcfg.tau_th_ms = tau_th;
      pipeline::InferenceOptions opts;
      opts.seed = tcfg.seed;
      opts.noiseless = noiseless;
      opts.alpha = tcfg.weights.alpha;
      const auto rep = pipeline::evaluate(model, ds, split_indices(ds, split_name),
                                          pipeline::make_policy(model, tcfg), opts);
      pipeline::write_policy_csv(rep.rows, report + ".csv");
      util::write_text_file(report + ".json", pipeline::metrics_json(rep) + "\n");
      std::cout << pipeline::metrics_json(rep) << "\n";
    } else if (*sw) {
      const auto cfg = load_config(config);
      const auto ds = data::load_dataset(data_dir);
      std::vector<std::size_t> ks;
      for (double k : parse_doubles(k_list)) ks.push_back(static_cast<std::size_t>(k));
      std::vector<std::uint64_t> sd;
      for (double s : parse_doubles(seeds)) sd.push_back(static_cast<std::uint64_t>(s));
      const auto result = pipeline::sweep_fixed_k(cfg.train, ds, ks, sd, log_line);
      pipeline::write_sweep_csv(result, out);
      std::cout << util::read_text_file(out);
    } else if (*rp) {
      const auto rows = pipeline::read_policy_csv(log_path);
      const auto edges = parse_doubles(bins);
      const auto rep = pipeline::snr_report(rows, edges, window);
      std::filesystem::path prefix = out.empty() ? std::filesystem::path(log_path) : std::filesystem::path(out);
      if (out.empty()) prefix.replace_extension();
      pipeline::write_snr_report(rep, prefix.string() + ".snr_bins.csv",
                                 prefix.string() + ".rolling_k.csv");
      std::cout << util::read_text_file(prefix.string() + ".snr_bins.csv");
      std::cout << "pearson(snr_db, k*) = " << rep.pearson_snr_k << "\n";
    } else if (*cal) {
      auto model = pipeline::load_model(checkpoint);
      model.latency = pipeline::calibrate_model(model.codec, model.params, repetitions);
      model.latency.save(std::filesystem::path(checkpoint) / "latency.json");
      std::cout << model.latency.to_json() << "\n";
    } else if (*dump) {
      const auto cfg = load_config(config);
      const auto model = pipeline::load_model(checkpoint);
      const auto ds = data::load_dataset(data_dir);
      const auto& test = ds.manifest.splits.test;
      const std::vector<std::size_t> idx(test.begin(),
                                         test.begin() + static_cast<std::ptrdiff_t>(
                                                            std::min(limit, test.size())));
      pipeline::dump_symbols(model, ds, idx, pipeline::make_policy(model, cfg.train), out);
    } else if (*exp) {
      data::export_csv(data::load_dataset(data_dir), out);
    } else if (*cfg_cmd) {
      std::cout << pipeline::dump_run_config(load_config(config));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::kIo);
  }
  return 0;
}
