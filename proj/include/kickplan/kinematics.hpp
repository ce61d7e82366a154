#pragma once

#include <vector>

#include "kickplan/geometry.hpp"
#include "kickplan/model.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// World poses of every link frame plus the world joint axes, one FK pass.
struct FkResult {
  std::vector<Mat3> rotation;      // link frame -> world
  std::vector<Vec3> position;      // joint/link frame origin, world
  std::vector<Vec3> axis_world;    // revolute axis, world (unused for base)
  Vec4 base_quat = Vec4::Zero();   // raw (w,x,y,z) block of q, pre-normalization
};

/// Configuration layout: [base position (3), base quaternion (w,x,y,z), joint
/// angles]. Velocity layout: [base linear velocity (world), base angular
/// velocity (body), joint rates].
inline FkResult forward_kinematics(const RobotModel& model, const VecX& q) {
  const int nl = model.num_links();
  FkResult fk;
  fk.rotation.resize(nl);
  fk.position.resize(nl);
  fk.axis_world.resize(nl, Vec3::Zero());

  for (int i : model.order) {
    const Joint& joint = model.joints[i];
    if (joint.kind == JointKind::kFloatingBase) {
      fk.position[i] = q.head<3>();
      fk.rotation[i] = quat_from_config(q).normalized().toRotationMatrix();
      fk.base_quat = q.segment<4>(3);
      continue;
    }
    const int p = joint.parent;
    const double angle = q[RobotModel::q_index(i)];
    fk.position[i] = fk.position[p] + fk.rotation[p] * joint.origin;
    fk.rotation[i] =
        fk.rotation[p] * Eigen::AngleAxisd(angle, joint.axis).toRotationMatrix();
    fk.axis_world[i] = fk.rotation[i] * joint.axis;
  }
  return fk;
}

inline Vec3 world_point(const FkResult& fk, int link, const Vec3& offset) {
  return fk.position[link] + fk.rotation[link] * offset;
}

inline Vec3 keypoint_position(const RobotModel& m, const FkResult& fk, int k) {
  return world_point(fk, m.keypoints[k].link, m.keypoints[k].offset);
}

inline Vec3 contact_position(const RobotModel& m, const FkResult& fk, int i) {
  return world_point(fk, m.contact_points[i].link, m.contact_points[i].offset);
}

inline WorldCapsule world_capsule(const RobotModel& m, const FkResult& fk,
                                  int link) {
  const Capsule& c = *m.links[link].capsule;
  return {world_point(fk, link, c.endpoint_a), world_point(fk, link, c.endpoint_b),
          c.radius};
}

/// 3 x nv Jacobian of a point rigidly attached to `link`: J v is the world
/// linear velocity of the point.
inline MatX point_jacobian(const RobotModel& model, const FkResult& fk,
                           int link, const Vec3& offset) {
  MatX J = MatX::Zero(3, model.nv());
  const Vec3 x = world_point(fk, link, offset);

  J.block<3, 3>(0, 0) = Mat3::Identity();
  const Mat3& R0 = fk.rotation[0];
  const Vec3 s = R0.transpose() * (x - fk.position[0]);
  J.block<3, 3>(0, 3) = -R0 * skew(s);

  for (int j = link; j != 0; j = model.joints[j].parent)
    J.col(RobotModel::v_index(j)) = fk.axis_world[j].cross(x - fk.position[j]);
  return J;
}

inline MatX point_jacobian(const RobotModel& model, const VecX& q, int link,
                           const Vec3& offset) {
  return point_jacobian(model, forward_kinematics(model, q), link, offset);
}

/// 3 x nv Jacobian mapping generalized velocity to the world angular velocity
/// of `link`.
inline MatX angular_jacobian(const RobotModel& model, const FkResult& fk,
                             int link) {
  MatX W = MatX::Zero(3, model.nv());
  W.block<3, 3>(0, 3) = fk.rotation[0];
  for (int j = link; j != 0; j = model.joints[j].parent)
    W.col(RobotModel::v_index(j)) = fk.axis_world[j];
  return W;
}

inline Vec3 center_of_mass(const RobotModel& model, const FkResult& fk) {
  Vec3 com = Vec3::Zero();
  for (int i = 0; i < model.num_links(); ++i)
    com += model.links[i].mass * world_point(fk, i, model.links[i].com_offset);
  return com / model.total_mass;
}

inline Vec3 center_of_mass(const RobotModel& model, const VecX& q) {
  return center_of_mass(model, forward_kinematics(model, q));
}

inline MatX com_jacobian(const RobotModel& model, const FkResult& fk) {
  MatX J = MatX::Zero(3, model.nv());
  for (int i = 0; i < model.num_links(); ++i)
    J += (model.links[i].mass / model.total_mass) *
         point_jacobian(model, fk, i, model.links[i].com_offset);
  return J;
}

inline MatX com_jacobian(const RobotModel& model, const VecX& q) {
  return com_jacobian(model, forward_kinematics(model, q));
}

/// 6 x nv centroidal momentum matrix. Rows 0-2 map v to m*rdot, rows 3-5 to
/// the angular momentum about the CoM, both in the world frame.
inline MatX centroidal_momentum_matrix(const RobotModel& model,
                                       const FkResult& fk) {
  const int nv = model.nv();
  MatX A = MatX::Zero(6, nv);
  const Vec3 r = center_of_mass(model, fk);
  for (int i = 0; i < model.num_links(); ++i) {
    const Link& link = model.links[i];
    const Vec3 ci = world_point(fk, i, link.com_offset);
    const MatX Ji = point_jacobian(model, fk, i, link.com_offset);
    const MatX Wi = angular_jacobian(model, fk, i);
    const Mat3 Iw = fk.rotation[i] * link.inertia * fk.rotation[i].transpose();
    A.topRows<3>() += link.mass * Ji;
    A.bottomRows<3>() += skew(ci - r) * (link.mass * Ji) + Iw * Wi;
  }
  return A;
}

inline MatX centroidal_momentum_matrix(const RobotModel& model, const VecX& q) {
  return centroidal_momentum_matrix(model, forward_kinematics(model, q));
}

// ---------------------------------------------------------------------------
// Derivatives with respect to the raw configuration vector (dimension nq).
// Base-position and joint columns are analytic; the four quaternion columns
// come from central differences of the closed-form rigid rotation, accurate
// to ~1e-10, well inside the 1e-4 gradient budget used by the optimizer.
// ---------------------------------------------------------------------------

/// 3 x nq Jacobian of a world point attached to `link` w.r.t. q.
inline MatX point_jacobian_q(const RobotModel& model, const FkResult& fk,
                             int link, const Vec3& offset) {
  MatX J = MatX::Zero(3, model.nq());
  const Vec3 x = world_point(fk, link, offset);
  J.block<3, 3>(0, 0) = Mat3::Identity();

  // With joints frozen the point is rigid in the base frame; only the base
  // rotation depends on the quaternion block.
  const Vec3 s = fk.rotation[0].transpose() * (x - fk.position[0]);
  const double h = 1e-6;
  for (int c = 0; c < 4; ++c) {
    Vec4 qp = fk.base_quat, qm = fk.base_quat;
    qp[c] += h;
    qm[c] -= h;
    const Vec3 xp = Quat(qp[0], qp[1], qp[2], qp[3]).normalized() * s;
    const Vec3 xm = Quat(qm[0], qm[1], qm[2], qm[3]).normalized() * s;
    J.col(3 + c) = (xp - xm) / (2.0 * h);
  }

  for (int j = link; j != 0; j = model.joints[j].parent)
    J.col(RobotModel::q_index(j)) = fk.axis_world[j].cross(x - fk.position[j]);
  return J;
}

inline MatX point_jacobian_q(const RobotModel& model, const VecX& q, int link,
                             const Vec3& offset) {
  return point_jacobian_q(model, forward_kinematics(model, q), link, offset);
}

/// 3 x nq Jacobian of the CoM w.r.t. q.
inline MatX com_jacobian_q(const RobotModel& model, const FkResult& fk) {
  MatX J = MatX::Zero(3, model.nq());
  for (int i = 0; i < model.num_links(); ++i)
    J += (model.links[i].mass / model.total_mass) *
         point_jacobian_q(model, fk, i, model.links[i].com_offset);
  return J;
}

inline MatX com_jacobian_q(const RobotModel& model, const VecX& q) {
  return com_jacobian_q(model, forward_kinematics(model, q));
}

}  // namespace kickplan
