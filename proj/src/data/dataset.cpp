// SPDX-License-Identifier: Apache-2.0
#include "semlab/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "semlab/channel/channel.hpp"
#include "semlab/error.hpp"
#include "semlab/util/blob_io.hpp"
#include "semlab/util/seed.hpp"

namespace semlab::data {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::uint64_t kSceneStream = 1;
constexpr std::uint64_t kTrajectoryStream = 2;
constexpr std::uint64_t kRenderStream = 3;

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

double floor_z(const SceneConfig& cfg) { return -0.5 * cfg.room[2]; }

double reflect(double x, double lo, double hi, double& rate) {
  if (x < lo) {
    x = 2 * lo - x;
    rate = -rate;
  } else if (x > hi) {
    x = 2 * hi - x;
    rate = -rate;
  }
  return std::clamp(x, lo, hi);
}

geo::Quat euler_zyx(double yaw, double pitch, double roll) {
  return geo::multiply(geo::multiply(geo::axis_angle({0, 0, 1}, yaw),
                                     geo::axis_angle({0, 1, 0}, pitch)),
                       geo::axis_angle({1, 0, 0}, roll));
}

}  // namespace

void SceneConfig::validate() const {
  for (double d : room)
    if (!(d > 0.0)) throw ConfigError("room dimensions must be > 0");
  if (landmarks < 8) throw ConfigError("at least 8 landmarks are required");
  if (feature_dim == 0 || feature_dim % 2 != 0)
    throw ConfigError("feature_dim must be a positive even number");
  if (shadowing_db < 0 || feature_noise < 0 || imu_noise < 0)
    throw ConfigError("noise standard deviations must be >= 0");
  if (!(path_loss_exponent > 0.0)) throw ConfigError("path-loss exponent must be > 0");
  if (!(hfov_deg > 0 && hfov_deg < 180 && vfov_deg > 0 && vfov_deg < 180))
    throw ConfigError("field of view must lie in (0, 180) degrees");
  if (!(dt_s > 0)) throw ConfigError("dt must be > 0");
  if (max_speed < 0 || accel_std < 0 || max_yaw_rate_deg < 0 || max_tilt_rate_deg < 0 ||
      angular_accel_std_deg < 0 || max_pitch_deg < 0 || max_roll_deg < 0 ||
      yaw_centering_gain < 0)
    throw ConfigError("motion limits must be >= 0");
  if ((max_yaw_rate_deg + 2 * max_tilt_rate_deg) * dt_s > 10.0)
    throw ConfigError("angular rate limits allow more than 10 degrees per step");
  if (!(min_height >= 0 && min_height < max_height && max_height <= room[2]))
    throw ConfigError("camera height range must lie inside the room");
  if (!(2 * wall_margin < std::min(room[0], room[1])))
    throw ConfigError("wall margin leaves no walkable area");
}

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(util::derive_seed(cfg.seed, kSceneStream));
  Scene scene;
  scene.access_point = cfg.access_point;
  for (std::size_t i = 0; i < cfg.landmarks; ++i) {
    geo::Vec3 p;
    for (int a = 0; a < 3; ++a) {
      std::uniform_real_distribution<double> d(-0.5 * cfg.room[a], 0.5 * cfg.room[a]);
      p[a] = d(rng);
    }
    scene.landmarks.push_back(p);
  }
  return scene;
}

std::vector<geo::Pose> generate_trajectory(const SceneConfig& cfg, std::size_t n) {
  cfg.validate();
  if (n < 2) throw ConfigError("a trajectory needs at least 2 poses");
  std::mt19937_64 rng(util::derive_seed(cfg.seed, kTrajectoryStream));
  std::normal_distribution<double> gauss;

  const double lo[3] = {-0.5 * cfg.room[0] + cfg.wall_margin,
                        -0.5 * cfg.room[1] + cfg.wall_margin, floor_z(cfg) + cfg.min_height};
  const double hi[3] = {0.5 * cfg.room[0] - cfg.wall_margin, 0.5 * cfg.room[1] - cfg.wall_margin,
                        floor_z(cfg) + cfg.max_height};
  geo::Vec3 p{0.0, 0.0, 0.5 * (lo[2] + hi[2])};
  geo::Vec3 v{0.0, 0.0, 0.0};
  double angle[3] = {0.0, 0.0, 0.0};  // yaw, pitch, roll
  double rate[3] = {0.0, 0.0, 0.0};
  const double max_rate[3] = {cfg.max_yaw_rate_deg * kDeg, cfg.max_tilt_rate_deg * kDeg,
                              cfg.max_tilt_rate_deg * kDeg};
  const double max_angle[2] = {cfg.max_pitch_deg * kDeg, cfg.max_roll_deg * kDeg};
  const double vertical_scale = 0.3;

  std::vector<geo::Pose> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.push_back({p, euler_zyx(angle[0], angle[1], angle[2])});
    for (int a = 0; a < 3; ++a)
      v[a] += gauss(rng) * cfg.accel_std * cfg.dt_s * (a == 2 ? vertical_scale : 1.0);
    const double speed = std::hypot(v[0], v[1], v[2]);
    if (speed > cfg.max_speed)
      for (auto& c : v) c *= cfg.max_speed / speed;
    for (int a = 0; a < 3; ++a) p[a] = reflect(p[a] + v[a] * cfg.dt_s, lo[a], hi[a], v[a]);

    // yaw is pulled toward the room center, harder near the walls
    const double off_center = std::hypot(p[0], p[1]) / (0.5 * std::min(cfg.room[0], cfg.room[1]));
    const double heading_error =
        std::remainder(std::atan2(-p[1], -p[0]) - angle[0], 2 * std::numbers::pi);
    for (int a = 0; a < 3; ++a) {
      rate[a] += gauss(rng) * cfg.angular_accel_std_deg * kDeg * cfg.dt_s;
      if (a == 0)
        rate[a] += cfg.yaw_centering_gain * std::min(1.0, off_center) * heading_error * cfg.dt_s;
      rate[a] = std::clamp(rate[a], -max_rate[a], max_rate[a]);
    }
    angle[0] = std::remainder(angle[0] + rate[0] * cfg.dt_s, 2 * std::numbers::pi);
    angle[1] = reflect(angle[1] + rate[1] * cfg.dt_s, -max_angle[0], max_angle[0], rate[1]);
    angle[2] = reflect(angle[2] + rate[2] * cfg.dt_s, -max_angle[1], max_angle[1], rate[2]);
  }
  return out;
}

bool project_landmark(const geo::Pose& pose, const geo::Vec3& landmark, const SceneConfig& cfg,
                      double& u, double& v) {
  const geo::Vec3 rel{landmark[0] - pose.position[0], landmark[1] - pose.position[1],
                      landmark[2] - pose.position[2]};
  const geo::Vec3 d = geo::rotate(geo::conjugate(pose.orientation), rel);
  if (d[0] <= 0.05) return false;
  u = (-d[1] / d[0]) / std::tan(0.5 * cfg.hfov_deg * kDeg);
  v = (d[2] / d[0]) / std::tan(0.5 * cfg.vfov_deg * kDeg);
  return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
}

double rsrp_at(const geo::Vec3& position, const Scene& scene, const SceneConfig& cfg,
               double shadowing_draw_db) {
  const double d = std::max(geo::distance(position, scene.access_point), 0.1);
  return cfg.ref_rsrp_dbm - 10.0 * cfg.path_loss_exponent * std::log10(d) + shadowing_draw_db;
}

SampleRecord render_observation(const geo::Pose& pose_prev, const geo::Pose& pose,
                                const Scene& scene, const SceneConfig& cfg, std::uint64_t seed) {
  for (const auto* p : {&pose_prev, &pose}) {
    const double qn = geo::norm(p->orientation);
    if (!std::isfinite(p->position[0] + p->position[1] + p->position[2]) ||
        !(std::abs(qn - 1.0) < 1e-6))
      throw DegenerateInputError("pose must have a finite position and a unit quaternion");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  SampleRecord rec;
  rec.features.assign(cfg.feature_dim, 0.0);
  const std::size_t slots = std::min(cfg.feature_dim / 2, scene.landmarks.size());
  for (std::size_t j = 0; j < slots; ++j) {
    double u = 0, v = 0;
    if (!project_landmark(pose, scene.landmarks[j], cfg, u, v)) continue;
    rec.features[2 * j] = f32(1.0 + 0.75 * u + cfg.feature_noise * gauss(rng));
    rec.features[2 * j + 1] = f32(1.0 + 0.75 * v + cfg.feature_noise * gauss(rng));
  }

  geo::Quat rel = geo::multiply(geo::conjugate(pose_prev.orientation), pose.orientation);
  if (rel.w < 0) rel = -rel;
  if (cfg.imu_noise > 0) {
    rel.w += cfg.imu_noise * gauss(rng);
    rel.x += cfg.imu_noise * gauss(rng);
    rel.y += cfg.imu_noise * gauss(rng);
    rel.z += cfg.imu_noise * gauss(rng);
  }
  rel = geo::normalized(rel);
  rec.imu = {f32(rel.w), f32(rel.x), f32(rel.y), f32(rel.z)};

  rec.rsrp_dbm = f32(rsrp_at(pose.position, scene, cfg, cfg.shadowing_db * gauss(rng)));
  rec.snr_linear = f32(channel::feedback_to_snr(rec.rsrp_dbm, cfg.noise_floor_dbm));
  rec.pose.position = {f32(pose.position[0]), f32(pose.position[1]), f32(pose.position[2])};
  const geo::Quat q = pose.orientation.w < 0 ? -pose.orientation : pose.orientation;
  rec.pose.orientation = {f32(q.w), f32(q.x), f32(q.y), f32(q.z)};
  return rec;
}

bool SampleRecord::operator==(const SampleRecord& o) const {
  return features == o.features && imu == o.imu && rsrp_dbm == o.rsrp_dbm &&
         snr_linear == o.snr_linear && pose.position == o.pose.position &&
         pose.orientation.as_array() == o.pose.orientation.as_array() && index == o.index;
}

Splits split(std::size_t n, const std::array<double, 3>& ratios) {
  double sum = 0;
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0, 1]");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1]));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[2]));
  const std::size_t n_train = n - n_val - n_test;
  Splits s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train)
      s.train.push_back(i);
    else if (i < n_train + n_val)
      s.val.push_back(i);
    else
      s.test.push_back(i);
  }
  return s;
}

Dataset generate_dataset(const SceneConfig& cfg, std::size_t n) {
  cfg.validate();
  Dataset ds;
  ds.manifest.count = n;
  ds.manifest.feature_dim = cfg.feature_dim;
  ds.manifest.seed = cfg.seed;
  ds.manifest.splits = split(n);
  if (n == 0) return ds;
  const Scene scene = generate_scene(cfg);
  const auto poses = generate_trajectory(cfg, std::max<std::size_t>(n, 2));
  ds.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rec = render_observation(poses[i == 0 ? 0 : i - 1], poses[i], scene, cfg,
                                  util::derive_seed(cfg.seed, kRenderStream, i));
    rec.index = i;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

namespace {

constexpr const char* kFeatures = "features.f32";
constexpr const char* kImu = "imu.f32";
constexpr const char* kRadio = "radio.f32";
constexpr const char* kPoses = "poses.f32";

std::vector<float> to_f32(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  const auto& m = ds.manifest;
  if (ds.records.size() != m.count)
    throw ConfigError("manifest count " + std::to_string(m.count) + " != record count " +
                      std::to_string(ds.records.size()));
  std::filesystem::create_directories(dir);
  std::vector<double> features, imu, radio, poses;
  features.reserve(m.count * m.feature_dim);
  for (const auto& r : ds.records) {
    if (r.features.size() != m.feature_dim)
      throw ConfigError("record " + std::to_string(r.index) + " has " +
                        std::to_string(r.features.size()) + " features");
    features.insert(features.end(), r.features.begin(), r.features.end());
    imu.insert(imu.end(), r.imu.begin(), r.imu.end());
    radio.push_back(r.rsrp_dbm);
    radio.push_back(r.snr_linear);
    poses.insert(poses.end(), r.pose.position.begin(), r.pose.position.end());
    const auto q = r.pose.orientation.as_array();
    poses.insert(poses.end(), q.begin(), q.end());
  }
  util::write_f32_blob(dir / kFeatures, to_f32(features));
  util::write_f32_blob(dir / kImu, to_f32(imu));
  util::write_f32_blob(dir / kRadio, to_f32(radio));
  util::write_f32_blob(dir / kPoses, to_f32(poses));

  nlohmann::json j;
  j["format"] = "semlab-dataset";
  j["version"] = DatasetManifest::kFormatVersion;
  j["count"] = m.count;
  j["feature_dim"] = m.feature_dim;
  j["seed"] = m.seed;
  j["splits"] = {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}};
  j["blobs"] = {{"features", kFeatures}, {"imu", kImu}, {"radio", kRadio}, {"poses", kPoses}};
  util::write_text_file(dir / "manifest.json", j.dump(1) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  auto& m = ds.manifest;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_text_file(dir / "manifest.json"));
    if (j.at("format").get<std::string>() != "semlab-dataset")
      throw IoError(dir.string() + ": not a dataset manifest");
    const int version = j.at("version").get<int>();
    if (version != DatasetManifest::kFormatVersion)
      throw IoError(dir.string() + ": dataset format version " + std::to_string(version) +
                    " is not supported (expected " +
                    std::to_string(DatasetManifest::kFormatVersion) + ")");
    m.count = j.at("count").get<std::size_t>();
    m.feature_dim = j.at("feature_dim").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.splits.train = j.at("splits").at("train").get<std::vector<std::size_t>>();
    m.splits.val = j.at("splits").at("val").get<std::vector<std::size_t>>();
    m.splits.test = j.at("splits").at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + ": malformed dataset manifest: " + e.what());
  }
  std::vector<bool> seen(m.count, false);
  for (const auto* part : {&m.splits.train, &m.splits.val, &m.splits.test})
    for (std::size_t i : *part) {
      if (i >= m.count || seen[i])
        throw IoError(dir.string() + ": split index " + std::to_string(i) +
                      " is out of range or repeated");
      seen[i] = true;
    }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw IoError(dir.string() + ": splits do not cover every sample");

  const auto blob = [&](const char* key, std::size_t per_row) {
    return util::read_f32_blob(dir / j.at("blobs").at(key).get<std::string>(),
                               m.count * per_row);
  };
  const auto features = blob("features", m.feature_dim);
  const auto imu = blob("imu", 4);
  const auto radio = blob("radio", 2);
  const auto poses = blob("poses", 7);
  ds.records.resize(m.count);
  for (std::size_t i = 0; i < m.count; ++i) {
    auto& r = ds.records[i];
    r.index = i;
    r.features.assign(features.begin() + static_cast<std::ptrdiff_t>(i * m.feature_dim),
                      features.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.feature_dim));
    for (int c = 0; c < 4; ++c) r.imu[c] = imu[i * 4 + c];
    r.rsrp_dbm = radio[i * 2];
    r.snr_linear = radio[i * 2 + 1];
    const float* p = poses.data() + i * 7;
    r.pose.position = {p[0], p[1], p[2]};
    r.pose.orientation = {p[3], p[4], p[5], p[6]};
  }
  return ds;
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "index,split,px,py,pz,qw,qx,qy,qz,rsrp_dbm,snr_linear,imu_w,imu_x,imu_y,imu_z";
  for (std::size_t f = 0; f < ds.manifest.feature_dim; ++f) out << ",f" << f;
  out << '\n';
  std::vector<const char*> split_of(ds.records.size(), "train");
  for (std::size_t i : ds.manifest.splits.val) split_of.at(i) = "val";
  for (std::size_t i : ds.manifest.splits.test) split_of.at(i) = "test";
  for (const auto& r : ds.records) {
    const auto q = r.pose.orientation.as_array();
    out << r.index << ',' << split_of[r.index] << ',' << r.pose.position[0] << ','
        << r.pose.position[1] << ',' << r.pose.position[2] << ',' << q[0] << ',' << q[1] << ','
        << q[2] << ',' << q[3] << ',' << r.rsrp_dbm << ',' << r.snr_linear << ',' << r.imu[0]
        << ',' << r.imu[1] << ',' << r.imu[2] << ',' << r.imu[3];
    for (double f : r.features) out << ',' << f;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace semlab::data
