// Acceptance suite: one pass/fail line per shipped guarantee, exercised at
// the stated tolerance. Returns nonzero if any check fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "kickplan/imitation.hpp"
#include "kickplan/io.hpp"
#include "kickplan/pipeline.hpp"
#include "support/kick_problem.hpp"
#include "support/test_models.hpp"

using namespace kickplan;
namespace kt = kickplan::testing;

namespace {

struct Harness {
  int failed = 0;
  void check(const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failed;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

RobotModel load_humanoid() {
  std::ifstream in(std::string(KICKPLAN_MODELS_DIR) + "/humanoid25.json");
  nlohmann::json doc;
  in >> doc;
  return load_model(doc);
}

// ---------------------------------------------------------------------------

void check_resampling(Harness& h) {
  // A 3.7 s clip at 120 Hz (445 frames) subsampled to 30 Hz.
  MocapClip clip;
  clip.rate = 120.0;
  clip.skeleton.joint_names = {"root"};
  clip.skeleton.parents = {-1};
  clip.skeleton.rest_offsets = {Vec3::Zero()};
  for (int f = 0; f < 445; ++f)
    clip.frames.push_back({Vec3(f / 120.0, 0, 0)});
  const MocapClip out = resample(clip, 30.0);
  h.check("resampling: 3.7 s at 120 Hz subsampled to 30 Hz gives 112 knots",
          out.num_frames() == 112, std::to_string(out.num_frames()) + " knots");
}

void check_ret_schedule(Harness& h) {
  RetSchedule s;
  s.d_max = 0.30;
  s.d_min = 0.10;
  s.t_start = 2e8;
  s.t_end = 8e8;
  s.stairs = 2;
  const bool lo = ret_threshold(0.0, s) == 0.30 &&
                  ret_threshold(s.t_start - 1.0, s) == 0.30;
  const bool hi = ret_threshold(s.t_end, s) == 0.10 &&
                  ret_threshold(2.0 * s.t_end, s) == 0.10;
  bool monotone = true;
  double prev = ret_threshold(0.0, s);
  for (int i = 1; i < 10000; ++i) {
    const double d = ret_threshold(i * (1.2 * s.t_end) / 9999.0, s);
    if (d > prev + 1e-12) monotone = false;
    prev = d;
  }
  h.check("early-termination threshold: exactly 0.30 m before the ramp and "
          "0.10 m after",
          lo && hi);
  h.check("early-termination threshold: monotone non-increasing over a "
          "10^4-point sweep",
          monotone);
}

void check_kinematic_kernels(Harness& h) {
  const RobotModel m = load_humanoid();
  std::mt19937 rng(2024);
  const double dt = 1e-6;
  double worst_point = 0.0, worst_com = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const VecX q = kt::random_configuration(m, rng);
    const VecX v = kt::random_velocity(m, rng);
    const FkResult fk = forward_kinematics(m, q);
    const FkResult fk2 =
        forward_kinematics(m, integrate_configuration(q, v, dt));
    const int link = 1 + trial % (m.num_links() - 1);
    const Vec3 offset(0.05, -0.02, 0.04);
    const MatX J = point_jacobian(m, fk, link, offset);
    const Vec3 fd =
        (world_point(fk2, link, offset) - world_point(fk, link, offset)) / dt;
    worst_point = std::max(worst_point, (J * v - fd).norm());

    const MatX Jc = com_jacobian(m, fk);
    const Vec3 fdc = (center_of_mass(m, integrate_configuration(q, v, dt)) -
                      center_of_mass(m, fk)) /
                     dt;
    worst_com = std::max(worst_com, (Jc * v - fdc).norm());
  }
  h.check("point Jacobian matches central differences within 1e-5 on 100 "
          "random 25-joint configurations",
          worst_point < 1e-5, "worst " + fmt(worst_point));
  h.check("CoM Jacobian matches central differences within 1e-5 on 100 "
          "random 25-joint configurations",
          worst_com < 1e-5, "worst " + fmt(worst_com));

  // Centroidal angular momentum vs per-link momentum summation.
  double worst_cam = 0.0;
  const double hstep = 1e-5;
  for (int trial = 0; trial < 25; ++trial) {
    const VecX q = kt::random_configuration(m, rng);
    const VecX v = kt::random_velocity(m, rng);
    const FkResult fk = forward_kinematics(m, q);
    const FkResult fkp =
        forward_kinematics(m, integrate_configuration(q, v, hstep));
    const FkResult fkm =
        forward_kinematics(m, integrate_configuration(q, v, -hstep));
    const Vec3 r = center_of_mass(m, fk);
    Vec3 h_ref = Vec3::Zero();
    for (int i = 0; i < m.num_links(); ++i) {
      const Link& link = m.links[i];
      const Vec3 p = world_point(fk, i, link.com_offset);
      const Vec3 pdot = (world_point(fkp, i, link.com_offset) -
                         world_point(fkm, i, link.com_offset)) /
                        (2 * hstep);
      const Mat3 Rdot = (fkp.rotation[i] - fkm.rotation[i]) / (2 * hstep);
      const Mat3 omega_hat = Rdot * fk.rotation[i].transpose();
      const Vec3 omega(omega_hat(2, 1), omega_hat(0, 2), omega_hat(1, 0));
      h_ref += (p - r).cross(link.mass * pdot) +
               fk.rotation[i] * link.inertia * fk.rotation[i].transpose() *
                   omega;
    }
    const VecX h6 = centroidal_momentum_matrix(m, fk) * v;
    worst_cam = std::max(worst_cam, (h6.tail<3>() - h_ref).norm());
  }
  h.check("centroidal momentum matrix matches brute-force per-link momentum "
          "within 1e-8",
          worst_cam < 1e-8, "worst " + fmt(worst_cam));
}

// Lagrangian finite-difference oracle on a fixed-base 3-link chain.
struct ChainEnergy {
  const RobotModel& m;

  double kinetic(const VecX& theta, const VecX& theta_dot) const {
    VecX q = kt::neutral_configuration(m);
    q.tail(m.num_actuated()) = theta;
    const FkResult fk = forward_kinematics(m, q);
    double T = 0.0;
    for (int i = 1; i < m.num_links(); ++i) {
      Vec3 omega = Vec3::Zero(), vel = Vec3::Zero();
      const Vec3 com = world_point(fk, i, m.links[i].com_offset);
      for (int j = i; j != 0; j = m.joints[j].parent) {
        const double rate = theta_dot[j - 1];
        omega += fk.axis_world[j] * rate;
        vel += fk.axis_world[j].cross(com - fk.position[j]) * rate;
      }
      const Mat3 Iw =
          fk.rotation[i] * m.links[i].inertia * fk.rotation[i].transpose();
      T += 0.5 * m.links[i].mass * vel.squaredNorm() + 0.5 * omega.dot(Iw * omega);
    }
    return T;
  }

  double potential(const VecX& theta) const {
    VecX q = kt::neutral_configuration(m);
    q.tail(m.num_actuated()) = theta;
    const FkResult fk = forward_kinematics(m, q);
    double V = 0.0;
    for (int i = 0; i < m.num_links(); ++i)
      V += m.links[i].mass * kGravity *
           world_point(fk, i, m.links[i].com_offset).z();
    return V;
  }

  double dT_dqdot(const VecX& th, const VecX& thd, int j, double hh) const {
    VecX p = thd, q_ = thd;
    p[j] += hh;
    q_[j] -= hh;
    return (kinetic(th, p) - kinetic(th, q_)) / (2 * hh);
  }
};

void check_inverse_dynamics(Harness& h) {
  const RobotModel m = kt::three_link_chain();
  const ChainEnergy energy{m};
  std::mt19937 rng(73);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = m.num_actuated();
  const double step = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    VecX th(n), thd(n), thdd(n);
    for (int i = 0; i < n; ++i) {
      th[i] = 0.8 * u(rng);
      thd[i] = u(rng);
      thdd[i] = u(rng);
    }
    VecX q = kt::neutral_configuration(m);
    q.tail(n) = th;
    VecX v = VecX::Zero(m.nv());
    v.tail(n) = thd;
    VecX a = VecX::Zero(m.nv());
    a.tail(n) = thdd;
    const VecX tau = inverse_dynamics(m, q, v, a).tau;
    for (int j = 0; j < n; ++j) {
      const double ddt = (energy.dT_dqdot(th + step * thd, thd + step * thdd,
                                          j, step) -
                          energy.dT_dqdot(th - step * thd, thd - step * thdd,
                                          j, step)) /
                         (2 * step);
      VecX thp = th, thm = th;
      thp[j] += step;
      thm[j] -= step;
      const double dTdq =
          (energy.kinetic(thp, thd) - energy.kinetic(thm, thd)) / (2 * step);
      const double dVdq =
          (energy.potential(thp) - energy.potential(thm)) / (2 * step);
      worst = std::max(worst, std::abs(tau[j] - (ddt - dTdq + dVdq)));
    }
  }
  h.check("inverse dynamics matches the Lagrangian finite-difference oracle "
          "within 1e-4 on a 3-link chain",
          worst < 1e-4, "worst " + fmt(worst));
}

void check_kick_optimization(Harness& h) {
  const RobotModel model = kt::load_reduced_biped();
  const ProblemSpec spec = kt::make_kick_spec(model);
  h.check("desk-scale kick problem spans 60 knots",
          spec.num_knots() == 60, std::to_string(spec.num_knots()) + " knots");

  const auto t0 = std::chrono::steady_clock::now();
  const FeasibilityResult out = retarget_until_feasible(spec, {}, {});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const SolveReport& fr = out.retarget.full_report;

  h.check("kick optimization converges with max equality residual <= 1e-4",
          fr.converged && fr.eq_violation <= 1e-4,
          "eq " + fmt(fr.eq_violation));
  h.check("kick optimization inequality violation <= 1e-6",
          fr.ineq_violation <= 1e-6, "ineq " + fmt(fr.ineq_violation));
  h.check("kick optimization completes within 10 minutes on one core",
          secs <= 600.0, fmt(secs) + " s, " + std::to_string(out.rounds) +
                             " round(s)");
  h.check("verified inverse-dynamics torques stay inside the joint limits",
          out.feasible && out.torques.feasible,
          "worst limit use " + fmt(out.torques.max_ratio));

  const KinodynamicTrajectory& traj = out.retarget.trajectory;

  // Locked ankle/toe joints stay still between lock and impact.
  double worst_rate = 0.0;
  for (int k = 0; k < traj.num_knots(); ++k) {
    const double t = traj.time(k);
    if (t < spec.schedule.t_lock || t > spec.schedule.t_impact) continue;
    for (int j : spec.locked_joints)
      worst_rate =
          std::max(worst_rate, std::abs(traj.v[k][RobotModel::v_index(j)]));
  }
  h.check("ankle joint rate <= 1e-3 rad/s throughout the lock window",
          worst_rate <= 1e-3, "worst " + fmt(worst_rate));

  // Approach angle of the optimized stance.
  const double angle =
      detail::approach_angle(model, traj.q.front(), spec) * 180.0 / M_PI;
  h.check("approach angle lies within [24 deg, 43 deg]",
          angle >= 24.0 - 1e-9 && angle <= 43.0 + 1e-9,
          fmt(angle) + " deg");

  // Proximal-to-distal peak ordering of forward link speeds (one-knot slack).
  const auto peak_knot = [&](const std::string& link_name) {
    const int link = model.link_index(link_name);
    int best = 0;
    double best_v = -1e30;
    for (int k = 0; k < traj.num_knots(); ++k) {
      const FkResult fk = forward_kinematics(model, traj.q[k]);
      const double fwd =
          (point_jacobian(model, fk, link, Vec3::Zero()) * traj.v[k]).x();
      if (fwd > best_v) {
        best_v = fwd;
        best = k;
      }
    }
    return best;
  };
  const int kp = peak_knot("pelvis"), kth = peak_knot("r_thigh"),
            ksh = peak_knot("r_shank"), kft = peak_knot("r_foot");
  h.check("forward-speed peaks run proximal to distal "
          "(pelvis, thigh, shank, foot) with one-knot slack",
          kp < kth + 1 && kth < ksh + 1 && ksh <= kft + 1,
          "knots " + std::to_string(kp) + ", " + std::to_string(kth) + ", " +
              std::to_string(ksh) + ", " + std::to_string(kft));
}

void check_reward_identities(Harness& h) {
  const RobotModel model = kt::load_reduced_biped();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::uniform_real_distribution<double> s(-3.0, 3.0);
  bool identities = true, gating = true;
  for (int trial = 0; trial < 1000; ++trial) {
    RewardWeights w;
    w.w_keypoint = u(rng);
    w.w_joint = u(rng);
    w.w_joint_vel = u(rng);
    w.w_com = u(rng);
    RobotState state{kt::random_configuration(model, rng),
                     kt::random_velocity(model, rng)};
    const RewardComponents r = reward_imitation(state, state, model, w);
    identities = identities && r.keypoint == w.w_keypoint &&
                 r.joint == w.w_joint + w.w_joint_vel && r.com == w.w_com;

    Vec3 v_ball(s(rng), s(rng), s(rng));
    const Vec3 n = Vec3(s(rng), s(rng), s(rng)).normalized();
    if (v_ball.dot(n) > 0.0) v_ball -= 2.0 * v_ball.dot(n) * n;
    gating = gating && reward_ball(v_ball, n, u(rng)) == 0.0;
  }
  h.check("rewards at zero tracking error equal their weights exactly over "
          "10^3 random inputs",
          identities);
  h.check("ball reward is exactly zero whenever the ball does not move "
          "toward the target",
          gating);
}

}  // namespace

int main() {
  Harness h;
  check_resampling(h);
  check_ret_schedule(h);
  check_kinematic_kernels(h);
  check_inverse_dynamics(h);
  check_reward_identities(h);
  check_kick_optimization(h);
  if (h.failed == 0)
    std::printf("all acceptance checks passed\n");
  else
    std::printf("%d acceptance check(s) FAILED\n", h.failed);
  return h.failed == 0 ? 0 : 1;
}
