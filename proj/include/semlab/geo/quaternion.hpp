// SPDX-License-Identifier: Apache-2.0
//
// Scalar-first (w, x, y, z) quaternions with the Hamilton product.
#pragma once

#include <array>

namespace semlab::geo {

using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>;

struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec4 as_array() const noexcept { return {w, x, y, z}; }
  static Quat from_array(const Vec4& v) noexcept { return {v[0], v[1], v[2], v[3]}; }
  Quat operator-() const noexcept { return {-w, -x, -y, -z}; }
};

struct Pose {
  Vec3 position{0.0, 0.0, 0.0};
  Quat orientation{};
};

double norm(const Quat& q) noexcept;
/// Throws DegenerateInputError when the norm is at or below 1e-12.
Quat normalized(const Quat& q);
Quat conjugate(const Quat& q) noexcept;
Quat multiply(const Quat& a, const Quat& b) noexcept;
/// Rotates v by unit quaternion q (q v q*).
Vec3 rotate(const Quat& q, const Vec3& v) noexcept;
/// Unit axis is normalized internally; a zero axis yields the identity.
Quat axis_angle(const Vec3& axis, double angle_rad) noexcept;

/// Exponential map; series expansion near zero.
Quat rotvec_to_quat(const Vec3& v) noexcept;
/// Logarithm map into the canonical ball |v| <= pi.
Vec3 quat_to_rotvec(const Quat& q) noexcept;

double quat_dot(const Quat& a, const Quat& b) noexcept;
/// -|q . q_hat_raw / |q_hat_raw||, in [-1, 0].
double angular_loss(const Quat& q, const Vec4& q_hat_raw);
/// 2 acos(|q . q'|) in degrees.
double angular_distance_deg(const Quat& a, const Quat& b) noexcept;
/// Relative rotation angle in radians, [0, pi].
double rotation_angle(const Quat& a, const Quat& b) noexcept;

/// (1 - alpha) |p - p_hat| - alpha |q . q_hat / |q_hat||.
double app_distortion(const Pose& truth, const Vec3& position_hat, const Vec4& quat_hat_raw,
                      double alpha);

double distance(const Vec3& a, const Vec3& b) noexcept;

}  // namespace semlab::geo
