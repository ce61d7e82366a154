#include <gtest/gtest.h>

#include <random>

#include "kickplan/dynamics.hpp"
#include "support/test_models.hpp"

using namespace kickplan;
namespace kt = kickplan::testing;

namespace {

TEST(InverseDynamics, StaticPendulumHorizontal) {
  const double mass = 1.5, length = 0.8;
  RobotModel m = kt::pendulum(mass, length);
  VecX q = kt::neutral_configuration(m);  // rod horizontal along +x
  VecX v = VecX::Zero(m.nv());
  VecX a = VecX::Zero(m.nv());
  IdResult id = inverse_dynamics(m, q, v, a);
  // Hinge about +y: holding the bob against gravity needs -m g l.
  EXPECT_NEAR(id.tau[0], -mass * kGravity * length, 1e-10);
}

TEST(InverseDynamics, FreeFallNeedsNoTorque) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(61);
  VecX q = kt::random_configuration(m, rng);
  VecX v = VecX::Zero(m.nv());
  VecX a = VecX::Zero(m.nv());
  a.head<3>() = Vec3(0, 0, -kGravity);
  IdResult id = inverse_dynamics(m, q, v, a);
  EXPECT_LT(id.tau.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(id.base_wrench.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(InverseDynamics, ZeroGravityRestNeedsNothing) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(67);
  VecX q = kt::random_configuration(m, rng);
  IdResult id = inverse_dynamics(m, q, VecX::Zero(m.nv()), VecX::Zero(m.nv()),
                                 {}, /*gravity=*/0.0);
  EXPECT_LT(id.tau.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InverseDynamics, LinearInAccelerationAndForces) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(71);
  VecX q = kt::random_configuration(m, rng);
  VecX v = kt::random_velocity(m, rng);
  VecX a1 = kt::random_velocity(m, rng), a2 = kt::random_velocity(m, rng);
  std::vector<Vec3> f1 = {Vec3(3, -1, 9), Vec3(0.5, 2, -4)};
  std::vector<Vec3> f2 = {Vec3(-2, 0, 1), Vec3(1, 1, 1)};

  auto tau = [&](const VecX& a, const std::vector<Vec3>& f) {
    return inverse_dynamics(m, q, v, a, f).tau;
  };
  std::vector<Vec3> fsum = {f1[0] + f2[0], f1[1] + f2[1]};
  VecX lhs = tau(a1 + a2, fsum);
  VecX rhs = tau(a1, f1) + tau(a2, f2) - tau(VecX::Zero(m.nv()), {});
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
}

// ---------------------------------------------------------------------------
// Lagrangian finite-difference oracle on a 3-link chain with the base held
// still: tau_j = d/dt(dT/dqdot_j) - dT/dq_j + dV/dq_j.
//
// The energies use their own chain recursion (axis-cross-arm link twists),
// independent of the Newton-Euler path under test.
// ---------------------------------------------------------------------------

struct ChainEnergy {
  const RobotModel& m;

  // Joint coordinates only; base at identity and motionless.
  double kinetic(const VecX& theta, const VecX& theta_dot) const {
    VecX q = kt::neutral_configuration(m);
    q.tail(m.num_actuated()) = theta;
    FkResult fk = forward_kinematics(m, q);
    double T = 0.0;
    for (int i = 1; i < m.num_links(); ++i) {
      Vec3 omega = Vec3::Zero();
      Vec3 vel = Vec3::Zero();
      const Vec3 com = world_point(fk, i, m.links[i].com_offset);
      for (int j = i; j != 0; j = m.joints[j].parent) {
        const double rate = theta_dot[j - 1];
        omega += fk.axis_world[j] * rate;
        vel += fk.axis_world[j].cross(com - fk.position[j]) * rate;
      }
      const Mat3 Iw = fk.rotation[i] * m.links[i].inertia * fk.rotation[i].transpose();
      T += 0.5 * m.links[i].mass * vel.squaredNorm() + 0.5 * omega.dot(Iw * omega);
    }
    return T;
  }

  double potential(const VecX& theta) const {
    VecX q = kt::neutral_configuration(m);
    q.tail(m.num_actuated()) = theta;
    FkResult fk = forward_kinematics(m, q);
    double V = 0.0;
    for (int i = 0; i < m.num_links(); ++i)
      V += m.links[i].mass * kGravity * world_point(fk, i, m.links[i].com_offset).z();
    return V;
  }

  double dT_dqdot(const VecX& th, const VecX& thd, int j, double h) const {
    VecX p = thd, q_ = thd;
    p[j] += h;
    q_[j] -= h;
    return (kinetic(th, p) - kinetic(th, q_)) / (2 * h);
  }
};

TEST(InverseDynamics, MatchesLagrangianOracleOnChain) {
  RobotModel m = kt::three_link_chain();
  ChainEnergy energy{m};
  std::mt19937 rng(73);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = m.num_actuated();
  const double h = 1e-5;

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
    VecX tau = inverse_dynamics(m, q, v, a).tau;

    for (int j = 0; j < n; ++j) {
      const double ddt =
          (energy.dT_dqdot(th + h * thd, thd + h * thdd, j, h) -
           energy.dT_dqdot(th - h * thd, thd - h * thdd, j, h)) / (2 * h);
      VecX thp = th, thm = th;
      thp[j] += h;
      thm[j] -= h;
      const double dTdq =
          (energy.kinetic(thp, thd) - energy.kinetic(thm, thd)) / (2 * h);
      const double dVdq =
          (energy.potential(thp) - energy.potential(thm)) / (2 * h);
      EXPECT_NEAR(tau[j], ddt - dTdq + dVdq, 1e-4);
    }
  }
}

TEST(InverseDynamics, ContactForceReflectsInBaseWrench) {
  RobotModel m = kt::three_link_chain();
  VecX q = kt::neutral_configuration(m);
  // Zero gravity, rest: the base must carry exactly the external force.
  std::vector<Vec3> f = {Vec3(5, -2, 7), Vec3(1, 0, -3)};
  IdResult id = inverse_dynamics(m, q, VecX::Zero(m.nv()), VecX::Zero(m.nv()),
                                 f, /*gravity=*/0.0);
  EXPECT_TRUE(id.base_wrench.head<3>().isApprox(-(f[0] + f[1]), 1e-12));
}

}  // namespace
