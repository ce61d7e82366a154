#pragma once

#include <vector>

#include "kickplan/kinematics.hpp"
#include "kickplan/model.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

struct IdResult {
  VecX tau;  // actuated joint torques, size n
  // Residual wrench at the floating base: force in the world frame, torque
  // about the base origin expressed in the body frame (conjugate to the
  // velocity layout).
  Eigen::Matrix<double, 6, 1> base_wrench;
};

/// Recursive Newton-Euler inverse dynamics with external contact forces.
///
/// `a` uses the velocity layout: [base linear acceleration (world), base
/// angular acceleration (body), joint accelerations]. `contact_forces` are
/// world-frame forces applied at the model's contact points (may be empty
/// to mean no external forces). Affine in both `a` and the forces.
inline IdResult inverse_dynamics(const RobotModel& model, const VecX& q,
                                 const VecX& v, const VecX& a,
                                 const std::vector<Vec3>& contact_forces = {},
                                 double gravity = kGravity) {
  const int nl = model.num_links();
  const FkResult fk = forward_kinematics(model, q);
  const Vec3 g_vec(0.0, 0.0, -gravity);

  std::vector<Vec3> omega(nl), alpha(nl), a_origin(nl);
  for (int idx : model.order) {
    const Joint& joint = model.joints[idx];
    if (joint.kind == JointKind::kFloatingBase) {
      const Mat3& R0 = fk.rotation[0];
      omega[0] = R0 * v.segment<3>(3);
      // d/dt(R w_b) = R[w_b]x w_b + R dw_b = R dw_b since w x w = 0.
      alpha[0] = R0 * a.segment<3>(3);
      a_origin[0] = a.head<3>();
      continue;
    }
    const int p = joint.parent;
    const Vec3 arm = fk.position[idx] - fk.position[p];
    a_origin[idx] =
        a_origin[p] + alpha[p].cross(arm) + omega[p].cross(omega[p].cross(arm));
    const Vec3 u = fk.axis_world[idx];
    const double rate = v[RobotModel::v_index(idx)];
    const double acc = a[RobotModel::v_index(idx)];
    omega[idx] = omega[p] + u * rate;
    alpha[idx] = alpha[p] + u * acc + omega[p].cross(u * rate);
  }

  // Net inertial wrench of each link about its joint origin, minus externals.
  std::vector<Vec3> force(nl, Vec3::Zero()), torque(nl, Vec3::Zero());
  for (int i = 0; i < nl; ++i) {
    const Link& link = model.links[i];
    const Vec3 com = world_point(fk, i, link.com_offset);
    const Vec3 a_com = a_origin[i] + alpha[i].cross(com - fk.position[i]) +
                       omega[i].cross(omega[i].cross(com - fk.position[i]));
    const Mat3 Iw = fk.rotation[i] * link.inertia * fk.rotation[i].transpose();
    const Vec3 F = link.mass * (a_com - g_vec);
    const Vec3 T = Iw * alpha[i] + omega[i].cross(Iw * omega[i]);
    force[i] = F;
    torque[i] = T + (com - fk.position[i]).cross(F);
  }
  for (int c = 0; c < static_cast<int>(contact_forces.size()); ++c) {
    const ContactPoint& cp = model.contact_points[c];
    const Vec3 p = contact_position(model, fk, c);
    force[cp.link] -= contact_forces[c];
    torque[cp.link] -= (p - fk.position[cp.link]).cross(contact_forces[c]);
  }

  IdResult out;
  out.tau = VecX::Zero(model.num_actuated());
  for (auto it = model.order.rbegin(); it != model.order.rend(); ++it) {
    const int i = *it;
    if (i == 0) continue;
    const int p = model.joints[i].parent;
    out.tau[i - 1] = fk.axis_world[i].dot(torque[i]);
    force[p] += force[i];
    torque[p] += torque[i] + (fk.position[i] - fk.position[p]).cross(force[i]);
  }
  out.base_wrench.head<3>() = force[0];
  out.base_wrench.tail<3>() = fk.rotation[0].transpose() * torque[0];
  return out;
}

}  // namespace kickplan
