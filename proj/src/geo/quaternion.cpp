// SPDX-License-Identifier: Apache-2.0
#include "semlab/geo/quaternion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "semlab/error.hpp"

namespace semlab::geo {

double norm(const Quat& q) noexcept {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

Quat normalized(const Quat& q) {
  const double n = norm(q);
  if (!(n > 1e-12)) throw DegenerateInputError("quaternion norm is zero");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat conjugate(const Quat& q) noexcept { return {q.w, -q.x, -q.y, -q.z}; }

Quat multiply(const Quat& a, const Quat& b) noexcept {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Vec3 rotate(const Quat& q, const Vec3& v) noexcept {
  const Quat r = multiply(multiply(q, Quat{0.0, v[0], v[1], v[2]}), conjugate(q));
  return {r.x, r.y, r.z};
}

Quat axis_angle(const Vec3& axis, double angle_rad) noexcept {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (n == 0.0) return {};
  const double s = std::sin(0.5 * angle_rad) / n;
  return {std::cos(0.5 * angle_rad), axis[0] * s, axis[1] * s, axis[2] * s};
}

Quat rotvec_to_quat(const Vec3& v) noexcept {
  const double t2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  const double t = std::sqrt(t2);
  // sin(t/2)/t
  const double s = t < 1e-2 ? 0.5 - t2 / 48.0 + t2 * t2 / 3840.0 : std::sin(0.5 * t) / t;
  return {std::cos(0.5 * t), v[0] * s, v[1] * s, v[2] * s};
}

Vec3 quat_to_rotvec(const Quat& q_in) noexcept {
  const Quat q = q_in.w < 0 ? -q_in : q_in;
  const double n = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  const double f = n < 1e-8 ? 2.0 / q.w : 2.0 * std::atan2(n, q.w) / n;
  return {q.x * f, q.y * f, q.z * f};
}

double quat_dot(const Quat& a, const Quat& b) noexcept {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

double angular_loss(const Quat& q, const Vec4& q_hat_raw) {
  return -std::abs(quat_dot(q, normalized(Quat::from_array(q_hat_raw))));
}

double rotation_angle(const Quat& a, const Quat& b) noexcept {
  return 2.0 * std::acos(std::clamp(std::abs(quat_dot(a, b)), 0.0, 1.0));
}

double angular_distance_deg(const Quat& a, const Quat& b) noexcept {
  return rotation_angle(a, b) * 180.0 / std::numbers::pi;
}

double distance(const Vec3& a, const Vec3& b) noexcept {
  return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

double app_distortion(const Pose& truth, const Vec3& position_hat, const Vec4& quat_hat_raw,
                      double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  return (1.0 - alpha) * distance(truth.position, position_hat) +
         alpha * angular_loss(truth.orientation, quat_hat_raw);
}

}  // namespace semlab::geo
