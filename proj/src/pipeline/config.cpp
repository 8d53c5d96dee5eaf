// SPDX-License-Identifier: Apache-2.0
#include "semlab/pipeline/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "semlab/error.hpp"
#include "semlab/util/blob_io.hpp"

namespace semlab::pipeline {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(tau_th_ms > 0.0)) throw ConfigError("tau_th_ms must be > 0");
  if (calibration_repetitions < 3) throw ConfigError("calibration_repetitions must be >= 3");
  weights.validate();
  codec.validate();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v +
                      "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

geo::Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto l = to_list(key, v);
  if (l.size() != 3) throw ConfigError("config key '" + key + "': expected 3 comma-separated values");
  return {l[0], l[1], l[2]};
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(const geo::Vec3& v) { return fmt(v[0]) + "," + fmt(v[1]) + "," + fmt(v[2]); }

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SEMLAB_NUM(path)                                                                  \
  Field {                                                                                 \
    [](RunConfig& c, const std::string& k, const std::string& v) {                        \
      c.path = to_double(k, v);                                                           \
    },                                                                                    \
        [](const RunConfig& c) { return fmt(c.path); }                                    \
  }
#define SEMLAB_UINT(path)                                                                 \
  Field {                                                                                 \
    [](RunConfig& c, const std::string& k, const std::string& v) {                        \
      c.path = static_cast<decltype(c.path)>(to_uint(k, v));                              \
    },                                                                                    \
        [](const RunConfig& c) { return std::to_string(c.path); }                         \
  }
#define SEMLAB_VEC3(path)                                                                 \
  Field {                                                                                 \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.path = to_vec3(k, v); }, \
        [](const RunConfig& c) { return fmt(c.path); }                                    \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      // dataset
      {"samples", SEMLAB_UINT(samples)},
      {"scene_seed", SEMLAB_UINT(scene.seed)},
      {"room", SEMLAB_VEC3(scene.room)},
      {"landmarks", SEMLAB_UINT(scene.landmarks)},
      {"access_point", SEMLAB_VEC3(scene.access_point)},
      {"path_loss_exponent", SEMLAB_NUM(scene.path_loss_exponent)},
      {"ref_rsrp_dbm", SEMLAB_NUM(scene.ref_rsrp_dbm)},
      {"shadowing_db", SEMLAB_NUM(scene.shadowing_db)},
      {"noise_floor_dbm", SEMLAB_NUM(scene.noise_floor_dbm)},
      {"feature_noise", SEMLAB_NUM(scene.feature_noise)},
      {"imu_noise", SEMLAB_NUM(scene.imu_noise)},
      {"hfov_deg", SEMLAB_NUM(scene.hfov_deg)},
      {"vfov_deg", SEMLAB_NUM(scene.vfov_deg)},
      {"dt_s", SEMLAB_NUM(scene.dt_s)},
      {"max_speed", SEMLAB_NUM(scene.max_speed)},
      {"accel_std", SEMLAB_NUM(scene.accel_std)},
      {"wall_margin", SEMLAB_NUM(scene.wall_margin)},
      {"min_height", SEMLAB_NUM(scene.min_height)},
      {"max_height", SEMLAB_NUM(scene.max_height)},
      {"max_yaw_rate_deg", SEMLAB_NUM(scene.max_yaw_rate_deg)},
      {"max_tilt_rate_deg", SEMLAB_NUM(scene.max_tilt_rate_deg)},
      {"angular_accel_std_deg", SEMLAB_NUM(scene.angular_accel_std_deg)},
      {"max_pitch_deg", SEMLAB_NUM(scene.max_pitch_deg)},
      {"max_roll_deg", SEMLAB_NUM(scene.max_roll_deg)},
      {"yaw_centering_gain", SEMLAB_NUM(scene.yaw_centering_gain)},
      // training
      {"epochs", SEMLAB_UINT(train.epochs)},
      {"batch_size", SEMLAB_UINT(train.batch_size)},
      {"learning_rate", SEMLAB_NUM(train.learning_rate)},
      {"seed", SEMLAB_UINT(train.seed)},
      {"tau_th_ms", SEMLAB_NUM(train.tau_th_ms)},
      {"calibration_repetitions", SEMLAB_UINT(train.calibration_repetitions)},
      {"alpha", SEMLAB_NUM(train.weights.alpha)},
      {"beta", SEMLAB_NUM(train.weights.beta)},
      {"eta", SEMLAB_NUM(train.weights.eta)},
      {"gamma", SEMLAB_NUM(train.weights.gamma)},
      {"noiseless",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.noiseless = to_bool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.train.noiseless ? "true" : "false"); }}},
      {"select_on_val",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.select_on_val = to_bool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.train.select_on_val ? "true" : "false"); }}},
      // codec
      {"feature_dim",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.scene.feature_dim = c.train.codec.feature_dim = to_uint(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.train.codec.feature_dim); }}},
      {"feature_width", SEMLAB_UINT(train.codec.feature_width)},
      {"k_max", SEMLAB_UINT(train.codec.k_max)},
      {"leaky_slope", SEMLAB_NUM(train.codec.leaky_slope)},
      {"init_seed", SEMLAB_UINT(train.codec.seed)},
      {"symbol_dims",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.train.codec.heads = codec::SymbolDimSet::parse(v);
        },
        [](const RunConfig& c) { return c.train.codec.heads.to_string(); }}},
      {"decoder_widths",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.codec.decoder_widths.clear();
          for (double w : to_list(k, v)) c.train.codec.decoder_widths.push_back(
              static_cast<std::size_t>(w));
        },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t w : c.train.codec.decoder_widths)
            s += (s.empty() ? "" : ",") + std::to_string(w);
          return s;
        }}},
  };
  return f;
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (kv.contains(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    kv[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

void apply_key_values(RunConfig& cfg, const KeyValues& kv) {
  const auto& f = fields();
  for (const auto& [key, value] : kv) {
    auto it = f.find(key);
    if (it == f.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, key, value);
  }
  cfg.scene.validate();
  cfg.train.validate();
  if (cfg.scene.feature_dim != cfg.train.codec.feature_dim)
    throw ConfigError("scene and codec feature dimensions differ");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg;
  apply_key_values(cfg, parse_key_values(util::read_text_file(path), path.string()));
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

}  // namespace semlab::pipeline
