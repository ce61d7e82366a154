#pragma once

#include <algorithm>
#include <cmath>

#include "kickplan/model.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

// ---------------------------------------------------------------------------
// Quaternion exponential / logarithm maps.
//
// Quaternions are stored (w, x, y, z). Base angular velocity lives in the
// body frame, so integration multiplies on the right.
// ---------------------------------------------------------------------------

/// Unit quaternion for the rotation vector phi (angle * axis).
inline Quat quat_exp(const Vec3& phi) {
  const double angle = phi.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
    q.normalize();
    return q;
  }
  const Vec3 axis = phi / angle;
  const double half = 0.5 * angle;
  const double s = std::sin(half);
  return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

/// Rotation vector of a unit quaternion, with angle in [0, pi].
inline Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 im(q.x(), q.y(), q.z());
  const double s = im.norm();
  if (s < 1e-12) return 2.0 * im;
  const double angle = 2.0 * std::atan2(s, q.w());
  return (angle / s) * im;
}

inline Quat quat_from_config(const VecX& q) {
  return Quat(q[3], q[4], q[5], q[6]);  // (w, x, y, z)
}

/// q' = q (+) v*dt: base position advances linearly, the base quaternion by
/// the exact exponential map of omega*dt, joint angles additively.
inline VecX integrate_configuration(const VecX& q, const VecX& v, double dt) {
  VecX out = q;
  out.head<3>() += v.head<3>() * dt;
  const Quat rot = quat_from_config(q).normalized() * quat_exp(v.segment<3>(3) * dt);
  out[3] = rot.w();
  out[4] = rot.x();
  out[5] = rot.y();
  out[6] = rot.z();
  out.tail(q.size() - 7) += v.tail(v.size() - 6) * dt;
  return out;
}

/// Tangent-space difference q_b (-) q_a of dimension nv: additive for base
/// position and joint angles, logarithm map for the quaternion block.
inline VecX configuration_difference(const VecX& q_a, const VecX& q_b) {
  const int nv = static_cast<int>(q_a.size()) - 1;
  VecX d(nv);
  d.head<3>() = q_b.head<3>() - q_a.head<3>();
  d.segment<3>(3) =
      quat_log(quat_from_config(q_a).normalized().conjugate() *
               quat_from_config(q_b).normalized());
  d.tail(nv - 6) = q_b.tail(nv - 6) - q_a.tail(nv - 6);
  return d;
}

// ---------------------------------------------------------------------------
// Capsule distance
// ---------------------------------------------------------------------------

/// Minimum distance between segments [a0,a1] and [b0,b1] (Ericson 5.1.9).
inline double segment_segment_distance(const Vec3& a0, const Vec3& a1,
                                       const Vec3& b0, const Vec3& b1) {
  const Vec3 d1 = a1 - a0;
  const Vec3 d2 = b1 - b0;
  const Vec3 r = a0 - b0;
  const double A = d1.squaredNorm();
  const double E = d2.squaredNorm();
  const double F = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double eps = 1e-14;
  if (A <= eps && E <= eps) {
    return r.norm();
  }
  if (A <= eps) {
    t = std::clamp(F / E, 0.0, 1.0);
  } else {
    const double C = d1.dot(r);
    if (E <= eps) {
      s = std::clamp(-C / A, 0.0, 1.0);
    } else {
      const double B = d1.dot(d2);
      const double denom = A * E - B * B;
      s = denom > eps ? std::clamp((B * F - C * E) / denom, 0.0, 1.0) : 0.0;
      t = (B * s + F) / E;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-C / A, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((B - C) / A, 0.0, 1.0);
      }
    }
  }
  return (a0 + s * d1 - (b0 + t * d2)).norm();
}

struct WorldCapsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

/// Centerline distance between two capsules; the collision constraint
/// compares this against the sum of radii.
inline double capsule_distance(const WorldCapsule& ca, const WorldCapsule& cb) {
  return segment_segment_distance(ca.a, ca.b, cb.a, cb.b);
}

}  // namespace kickplan
