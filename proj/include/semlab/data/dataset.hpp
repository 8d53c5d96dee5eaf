// SPDX-License-Identifier: Apache-2.0
//
// Synthetic stand-in for a camera walking through an office: landmark
// projections as visual features, relative IMU quaternions and a log-distance
// radio field. Room frame is centered on the room; body frame is x forward,
// y left, z up.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semlab/geo/quaternion.hpp"

namespace semlab::data {

struct SceneConfig {
  geo::Vec3 room{5.8, 5.2, 3.85};
  std::size_t landmarks = 32;
  geo::Vec3 access_point{2.4, 2.1, 1.2};
  double path_loss_exponent = 2.2;
  double ref_rsrp_dbm = -40.0;
  double shadowing_db = 2.0;
  double noise_floor_dbm = -90.0;
  std::size_t feature_dim = 64;
  double feature_noise = 0.01;
  double imu_noise = 0.002;
  double hfov_deg = 110.0;
  double vfov_deg = 90.0;

  double dt_s = 1.0 / 30.0;
  double max_speed = 1.0;
  double accel_std = 1.5;
  double wall_margin = 0.2;
  /// Camera height range above the floor.
  double min_height = 0.8;
  double max_height = 2.2;
  double max_yaw_rate_deg = 90.0;
  double max_tilt_rate_deg = 30.0;
  double angular_accel_std_deg = 120.0;
  double max_pitch_deg = 30.0;
  double max_roll_deg = 15.0;
  /// Yaw acceleration toward the room center per radian of heading error
  /// (1/s^2); 0 gives a free random walk.
  double yaw_centering_gain = 8.0;

  std::uint64_t seed = 7;

  void validate() const;
};

struct Scene {
  std::vector<geo::Vec3> landmarks;
  geo::Vec3 access_point{};
};

struct SampleRecord {
  std::vector<double> features;
  geo::Vec4 imu{1.0, 0.0, 0.0, 0.0};
  double rsrp_dbm = 0.0;
  double snr_linear = 1.0;
  geo::Pose pose{};
  std::size_t index = 0;

  bool operator==(const SampleRecord&) const;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;
  std::size_t count = 0;
  std::size_t feature_dim = 0;
  std::uint64_t seed = 0;
  Splits splits;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SampleRecord> records;
};

Scene generate_scene(const SceneConfig& cfg);
std::vector<geo::Pose> generate_trajectory(const SceneConfig& cfg, std::size_t n);

/// Normalized image-plane coordinates (u right, v up) in [-1, 1] when the
/// landmark is in front of the camera and inside the field of view.
bool project_landmark(const geo::Pose& pose, const geo::Vec3& landmark, const SceneConfig& cfg,
                      double& u, double& v);

double rsrp_at(const geo::Vec3& position, const Scene& scene, const SceneConfig& cfg,
               double shadowing_draw_db);

/// Values are rounded to binary32 so that persistence is exact.
SampleRecord render_observation(const geo::Pose& pose_prev, const geo::Pose& pose,
                                const Scene& scene, const SceneConfig& cfg, std::uint64_t seed);

/// Contiguous blocks in time order: train, then val, then test. Val and test
/// take floor(n * ratio); the remainder goes to train.
Splits split(std::size_t n, const std::array<double, 3>& ratios = {0.6, 0.2, 0.2});

Dataset generate_dataset(const SceneConfig& cfg, std::size_t n);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
void export_csv(const Dataset& ds, const std::filesystem::path& path);

}  // namespace semlab::data
