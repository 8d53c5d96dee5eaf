// SPDX-License-Identifier: Apache-2.0
//
// Flat "key = value" configuration with '#' comments. Unknown keys are errors.
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "semlab/codec/codec.hpp"
#include "semlab/data/dataset.hpp"
#include "semlab/vib/loss.hpp"

namespace semlab::pipeline {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  vib::LossWeights weights;
  codec::CodecConfig codec;
  std::uint64_t seed = 1;
  /// Train with an ideal channel (no AWGN on the symbol path).
  bool noiseless = false;
  double tau_th_ms = 16.0;
  int calibration_repetitions = 7;
  /// Evaluate on the validation split after each epoch and keep the best.
  bool select_on_val = true;

  void validate() const;
};

struct RunConfig {
  data::SceneConfig scene;
  std::size_t samples = 20000;
  TrainConfig train;
};

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& origin = "config");
/// Applies every key to `cfg`; throws ConfigError naming unknown or malformed keys.
void apply_key_values(RunConfig& cfg, const KeyValues& kv);
RunConfig load_run_config(const std::filesystem::path& path);
/// Every key with its current value, in the file format.
std::string dump_run_config(const RunConfig& cfg);

}  // namespace semlab::pipeline
