#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "kickplan/dynamics.hpp"
#include "kickplan/solver.hpp"
#include "kickplan/transcription.hpp"

namespace kickplan {

// ---------------------------------------------------------------------------
// Kinematic seeding
// ---------------------------------------------------------------------------

/// Damped least-squares IK tracking the per-knot keypoint targets. Each knot
/// warm-starts from its predecessor; velocities come from the tangent-space
/// difference of consecutive configurations, so the seed satisfies the pose
/// integration constraints exactly.
inline KinodynamicTrajectory ik_seed(const ProblemSpec& spec,
                                     const VecX& q_init, int iters_per_knot = 30,
                                     double damping = 1e-3) {
  const RobotModel& model = spec.model;
  const int N = spec.num_knots(), nv = model.nv();

  KinodynamicTrajectory traj;
  traj.dt = spec.dt;
  VecX q = q_init;
  for (int k = 0; k < N; ++k) {
    for (int it = 0; it < iters_per_knot; ++it) {
      const FkResult fk = forward_kinematics(model, q);
      const int m = static_cast<int>(spec.targets[k].size());
      if (m == 0) break;
      MatX J(3 * m, nv);
      VecX e(3 * m);
      for (int t = 0; t < m; ++t) {
        const auto& [kp, ref] = spec.targets[k][t];
        const Keypoint& key = model.keypoints[kp];
        e.segment<3>(3 * t) = ref - keypoint_position(model, fk, kp);
        J.middleRows<3>(3 * t) =
            point_jacobian(model, fk, key.link, key.offset);
      }
      if (e.norm() < 1e-10) break;
      const MatX JJt =
          J * J.transpose() + damping * MatX::Identity(3 * m, 3 * m);
      const VecX step = J.transpose() * JJt.ldlt().solve(e);
      q = integrate_configuration(q, step, 1.0);
      // Keep joints inside their boxes so the seed starts feasible.
      for (int j = 1; j <= model.num_actuated(); ++j) {
        double& qj = q[RobotModel::q_index(j)];
        qj = std::clamp(qj, model.joints[j].q_min, model.joints[j].q_max);
      }
    }
    traj.q.push_back(q);
  }
  for (int k = 0; k + 1 < N; ++k)
    traj.v.push_back(configuration_difference(traj.q[k], traj.q[k + 1]) /
                     spec.dt);
  const VecX v_last = N > 1 ? traj.v.back() : VecX(VecX::Zero(nv));
  traj.v.push_back(v_last);
  return traj;
}

/// Fills the centroidal block of a kinematic trajectory from the whole-body
/// state (CoM and momentum kernels). Rates come from finite differences;
/// the active contact forces take the minimum-norm distribution realizing
/// the net centroidal wrench, so both Newton and the angular-momentum
/// balance hold at the seed.
inline void seed_centroidal(const ProblemSpec& spec,
                            KinodynamicTrajectory& traj) {
  const RobotModel& model = spec.model;
  const int N = traj.num_knots(), nc = model.num_contacts();
  traj.com.clear();
  traj.com_vel.clear();
  traj.com_acc.clear();
  traj.ang_mom.clear();
  traj.ang_mom_rate.clear();
  traj.contact_pos.clear();
  traj.contact_force.clear();

  for (int k = 0; k < N; ++k) {
    const FkResult fk = forward_kinematics(model, traj.q[k]);
    const MatX A = centroidal_momentum_matrix(model, fk);
    traj.com.push_back(center_of_mass(model, fk));
    traj.com_vel.push_back(A.topRows<3>() * traj.v[k] / model.total_mass);
    traj.ang_mom.push_back(A.bottomRows<3>() * traj.v[k]);
    traj.contact_pos.emplace_back();
    for (int i = 0; i < nc; ++i)
      traj.contact_pos.back().push_back(contact_position(model, fk, i));
  }
  for (int k = 0; k < N; ++k) {
    const int a = std::max(0, k - 1), b = std::min(N - 1, k + 1);
    const double span = (b - a) * traj.dt;
    traj.com_acc.push_back((traj.com_vel[b] - traj.com_vel[a]) / span);
    traj.ang_mom_rate.push_back((traj.ang_mom[b] - traj.ang_mom[a]) / span);
  }
  for (int k = 0; k < N; ++k) {
    std::vector<int> active;
    for (int i = 0; i < nc; ++i)
      if (spec.schedule.is_active(k, i)) active.push_back(i);
    traj.contact_force.emplace_back(nc, Vec3::Zero());
    if (active.empty()) continue;

    // Net wrench the contacts must realize about the CoM.
    VecX w(6);
    w.head<3>() = model.total_mass *
                  (traj.com_acc[k] - Vec3(0, 0, -kGravity));
    w.tail<3>() = traj.ang_mom_rate[k];
    MatX G(6, 3 * active.size());
    for (size_t j = 0; j < active.size(); ++j) {
      const Vec3 lever = traj.contact_pos[k][active[j]] - traj.com[k];
      G.block<3, 3>(0, 3 * j) = Mat3::Identity();
      Mat3 skew;
      skew << 0, -lever.z(), lever.y(),
              lever.z(), 0, -lever.x(),
              -lever.y(), lever.x(), 0;
      G.block<3, 3>(3, 3 * j) = skew;
    }
    // Minimum-norm solution, lightly damped for rank-deficient geometries.
    const MatX GGt = G * G.transpose() + 1e-9 * MatX::Identity(6, 6);
    const VecX f = G.transpose() * GGt.ldlt().solve(w);
    // Project each force into the friction cone with a sane magnitude cap:
    // fast swing phases can demand wrenches no single stance foot can
    // realize, and seeding those verbatim puts the optimizer in a region
    // with enormous cone violations.
    const double fz_cap = 2.0 * model.total_mass * kGravity;
    for (size_t j = 0; j < active.size(); ++j) {
      Vec3 fi = f.segment<3>(3 * j);
      fi.z() = std::clamp(fi.z(), 0.0, fz_cap);
      const double t_max = spec.friction * fi.z();
      fi.x() = std::clamp(fi.x(), -t_max, t_max);
      fi.y() = std::clamp(fi.y(), -t_max, t_max);
      traj.contact_force[k][active[j]] = fi;
    }
  }
}

// ---------------------------------------------------------------------------
// Two-stage retargeting
// ---------------------------------------------------------------------------

struct RetargetResult {
  KinodynamicTrajectory trajectory;
  SolveReport kinematic_report;
  SolveReport full_report;
};

/// Stage one solves a kinematics-only tracking problem from an IK seed;
/// stage two solves the full kinodynamic problem warm-started from it.
inline RetargetResult two_stage_retarget(const ProblemSpec& spec,
                                         const SolverOptions& kin_opts = {},
                                         const SolverOptions& full_opts = {},
                                         bool run_full = true) {
  spec.validate();
  VecX q0 = VecX::Zero(spec.model.nq());
  q0[3] = 1.0;
  if (!spec.targets[0].empty()) {
    // Drop the base at the first pelvis-like target to help the IK.
    q0.head<3>() = spec.targets[0][0].second;
  }

  RetargetResult result;
  KinodynamicTrajectory seed = ik_seed(spec, q0);

  {
    const NlpProblem kin = build_problem(spec, Stage::kKinematic);
    const VariableLayout lay = make_layout(spec, Stage::kKinematic);
    VecX x = pack_trajectory(seed, lay);
    result.kinematic_report = solve_nlp(kin, x, kin_opts);
    result.trajectory = unpack_trajectory(x, lay, spec.dt);
  }

  if (run_full) {
    seed_centroidal(spec, result.trajectory);
    const NlpProblem full = build_problem(spec, Stage::kFull);
    const VariableLayout lay = make_layout(spec, Stage::kFull);
    VecX x = pack_trajectory(result.trajectory, lay);
    result.full_report = solve_nlp(full, x, full_opts);
    result.trajectory = unpack_trajectory(x, lay, spec.dt);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Full-body torque verification
// ---------------------------------------------------------------------------

struct TorqueViolation {
  int knot = 0;
  int joint = 0;  // actuated index, 0-based
  double torque = 0.0;
  double limit = 0.0;
};

struct TorqueReport {
  bool feasible = true;
  VecX peak_torque;               // per actuated joint, max |tau| over knots
  double max_ratio = 0.0;         // worst |tau| / limit
  double base_wrench_norm = 0.0;  // largest residual base wrench
  std::vector<TorqueViolation> violations;
};

/// Runs inverse dynamics along the trajectory with the optimized contact
/// forces; accelerations come from central differences of the knot
/// velocities. Flags every joint-knot pair exceeding its torque limit.
inline TorqueReport verify_torques(const RobotModel& model,
                                   const KinodynamicTrajectory& traj) {
  const int N = traj.num_knots(), n = model.num_actuated();
  if (N < 2) throw ValidationError("torque verification needs two knots");
  if (static_cast<int>(traj.contact_force.size()) != N)
    throw ValidationError("trajectory carries no contact forces to verify");

  TorqueReport report;
  report.peak_torque = VecX::Zero(n);
  for (int k = 0; k < N; ++k) {
    const int a = std::max(0, k - 1), b = std::min(N - 1, k + 1);
    const VecX acc = (traj.v[b] - traj.v[a]) / ((b - a) * traj.dt);
    const IdResult id =
        inverse_dynamics(model, traj.q[k], traj.v[k], acc,
                         traj.contact_force[k]);
    report.base_wrench_norm =
        std::max(report.base_wrench_norm, id.base_wrench.norm());
    for (int j = 0; j < n; ++j) {
      const double tau = id.tau[j];
      const double limit = std::max(std::abs(model.joints[j + 1].tau_min),
                                    std::abs(model.joints[j + 1].tau_max));
      report.peak_torque[j] = std::max(report.peak_torque[j], std::abs(tau));
      if (limit > 0.0)
        report.max_ratio = std::max(report.max_ratio, std::abs(tau) / limit);
      if (tau < model.joints[j + 1].tau_min - 1e-9 ||
          tau > model.joints[j + 1].tau_max + 1e-9) {
        report.feasible = false;
        report.violations.push_back({k, j, tau, limit});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Verified retargeting loop
// ---------------------------------------------------------------------------

struct FeasibilityResult {
  RetargetResult retarget;
  TorqueReport torques;
  int rounds = 0;
  bool feasible = false;
  std::vector<double> proxy_scales;  // scale used in each round
};

/// Solves, verifies with full-body inverse dynamics, and re-solves with a
/// proportionally tightened torque proxy until verification passes or the
/// round budget runs out. `backoff` scales the proportional tightening.
inline FeasibilityResult retarget_until_feasible(
    ProblemSpec spec, const SolverOptions& kin_opts = {},
    const SolverOptions& full_opts = {}, int max_rounds = 5,
    double backoff = 0.9) {
  if (max_rounds < 1) throw ValidationError("need at least one solve round");
  FeasibilityResult out;
  for (int round = 0; round < max_rounds; ++round) {
    out.rounds = round + 1;
    out.proxy_scales.push_back(spec.torque_proxy_scale);
    out.retarget = two_stage_retarget(spec, kin_opts, full_opts);
    out.torques = verify_torques(spec.model, out.retarget.trajectory);
    if (out.torques.feasible) {
      out.feasible = true;
      break;
    }
    // Shrink the proxy budget in proportion to the worst overshoot.
    const double ratio = out.torques.max_ratio;
    if (ratio <= 1.0) break;  // verification failed for another reason
    spec.torque_proxy_scale =
        std::max(0.05, spec.torque_proxy_scale * backoff / ratio);
  }
  return out;
}

}  // namespace kickplan
