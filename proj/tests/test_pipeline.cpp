#include <gtest/gtest.h>

#include "kickplan/pipeline.hpp"
#include "support/kick_problem.hpp"
#include "support/test_models.hpp"

using namespace kickplan;
using kickplan::testing::load_reduced_biped;
using kickplan::testing::make_kick_spec;
using kickplan::testing::standing_configuration;

namespace {

/// A short all-contacts-active stand: constant keypoint targets taken from
/// the standing pose, no swing window inside the horizon.
ProblemSpec standing_spec(const RobotModel& model, int knots) {
  ProblemSpec spec;
  spec.model = model;
  spec.dt = 1.0 / 30.0;
  const VecX q = standing_configuration(spec.model);
  const FkResult fk = forward_kinematics(spec.model, q);
  std::vector<std::pair<int, Vec3>> frame;
  for (int k = 0; k < static_cast<int>(spec.model.keypoints.size()); ++k)
    frame.emplace_back(k, keypoint_position(spec.model, fk, k));
  spec.targets.assign(knots, frame);
  spec.schedule.active.assign(
      knots, std::vector<bool>(spec.model.num_contacts(), true));
  spec.schedule.t_swing = 100.0;  // outside the horizon
  spec.schedule.t_lock = 100.5;
  spec.schedule.t_impact = 101.0;
  spec.kick_foot_link = spec.model.link_index("r_toe");
  spec.support_foot_link = spec.model.link_index("l_foot");
  return spec;
}

TEST(IkSeed, TracksStandingTargets) {
  const RobotModel model = load_reduced_biped();
  const ProblemSpec spec = standing_spec(model, 4);
  VecX q0 = standing_configuration(model);
  q0[2] += 0.05;  // start slightly off
  const KinodynamicTrajectory seed = ik_seed(spec, q0);

  ASSERT_EQ(seed.num_knots(), 4);
  const FkResult fk = forward_kinematics(model, seed.q[0]);
  for (const auto& [kp, ref] : spec.targets[0])
    EXPECT_LT((keypoint_position(model, fk, kp) - ref).norm(), 0.02)
        << model.keypoints[kp].name;
  // Constant targets give a nearly stationary seed.
  for (int k = 0; k < seed.num_knots(); ++k)
    EXPECT_LT(seed.v[k].norm(), 0.5);
}

TEST(IkSeed, SatisfiesPoseIntegrationExactly) {
  const RobotModel model = load_reduced_biped();
  const ProblemSpec spec = make_kick_spec(model);
  const KinodynamicTrajectory seed =
      ik_seed(spec, standing_configuration(model));
  for (int k = 0; k + 1 < seed.num_knots(); ++k) {
    const VecX pred =
        integrate_configuration(seed.q[k], seed.v[k], spec.dt);
    EXPECT_LT(configuration_difference(pred, seed.q[k + 1]).norm(), 1e-10);
  }
}

TEST(TwoStageRetarget, StaticStandBalancesWeight) {
  const RobotModel model = load_reduced_biped();
  const ProblemSpec spec = standing_spec(model, 4);

  SolverOptions opts;
  opts.max_outer = 25;
  opts.max_inner = 300;
  const RetargetResult result = two_stage_retarget(spec, opts, opts);
  EXPECT_TRUE(result.kinematic_report.converged)
      << result.kinematic_report.message;
  EXPECT_TRUE(result.full_report.converged) << result.full_report.message;
  EXPECT_LE(result.full_report.eq_violation, 1e-4);
  EXPECT_LE(result.full_report.ineq_violation, 1e-6);

  // Per knot the vertical forces carry the robot's weight. The regularizer
  // trade-off leaves a sub-newton residual, so the tolerance is a small
  // fraction of bodyweight rather than exact.
  const double weight = model.total_mass * kGravity;
  for (int k = 0; k < result.trajectory.num_knots(); ++k) {
    Vec3 total = Vec3::Zero();
    for (const Vec3& f : result.trajectory.contact_force[k]) total += f;
    EXPECT_NEAR(total.z(), weight, 2.0) << "knot " << k;
    EXPECT_NEAR(total.x(), 0.0, 2.0);
    EXPECT_NEAR(total.y(), 0.0, 2.0);
  }
}

TEST(TwoStageRetarget, StaticStandPassesTorqueVerification) {
  const RobotModel model = load_reduced_biped();
  const ProblemSpec spec = standing_spec(model, 4);
  SolverOptions opts;
  opts.max_outer = 25;
  opts.max_inner = 300;
  const RetargetResult result = two_stage_retarget(spec, opts, opts);
  ASSERT_TRUE(result.full_report.converged);

  const TorqueReport torques = verify_torques(model, result.trajectory);
  EXPECT_TRUE(torques.feasible);
  EXPECT_TRUE(torques.violations.empty());
  EXPECT_LE(torques.max_ratio, 1.0);
  // The optimized force set balances the whole body: the residual base
  // wrench is small compared to the robot's weight.
  EXPECT_LT(torques.base_wrench_norm, 0.1 * model.total_mass * kGravity);
}

TEST(VerifyTorques, StaticPendulumWithinLimits) {
  const RobotModel model = kickplan::testing::pendulum(1.5, 0.8);
  KinodynamicTrajectory traj;
  traj.dt = 0.01;
  for (int k = 0; k < 3; ++k) {
    traj.q.push_back(kickplan::testing::neutral_configuration(model));
    traj.v.push_back(VecX::Zero(model.nv()));
    traj.contact_force.emplace_back();  // no contacts
  }
  const TorqueReport report = verify_torques(model, traj);
  EXPECT_TRUE(report.feasible);
  // Holding the horizontal rod takes m g l.
  EXPECT_NEAR(report.peak_torque[0], 1.5 * kGravity * 0.8, 1e-9);
}

TEST(VerifyTorques, FlagsOverloadedJoint) {
  const RobotModel model = kickplan::testing::pendulum(20.0, 0.8);  // 157 Nm
  KinodynamicTrajectory traj;
  traj.dt = 0.01;
  for (int k = 0; k < 3; ++k) {
    traj.q.push_back(kickplan::testing::neutral_configuration(model));
    traj.v.push_back(VecX::Zero(model.nv()));
    traj.contact_force.emplace_back();
  }
  const TorqueReport report = verify_torques(model, traj);
  EXPECT_FALSE(report.feasible);
  ASSERT_FALSE(report.violations.empty());
  EXPECT_EQ(report.violations[0].joint, 0);
  EXPECT_NEAR(std::abs(report.violations[0].torque), 20.0 * kGravity * 0.8,
              1e-9);
  EXPECT_GT(report.max_ratio, 1.5);
}

TEST(RetargetUntilFeasible, StandingNeedsOneRound) {
  const RobotModel model = load_reduced_biped();
  const ProblemSpec spec = standing_spec(model, 4);
  SolverOptions opts;
  opts.max_outer = 25;
  opts.max_inner = 300;
  const FeasibilityResult out = retarget_until_feasible(spec, opts, opts, 3);
  EXPECT_TRUE(out.feasible);
  EXPECT_EQ(out.rounds, 1);
  ASSERT_EQ(out.proxy_scales.size(), 1u);
  EXPECT_DOUBLE_EQ(out.proxy_scales[0], spec.torque_proxy_scale);
}

TEST(SeedCentroidal, ConsistentWithKernels) {
  const RobotModel model = load_reduced_biped();
  const ProblemSpec spec = make_kick_spec(model);
  KinodynamicTrajectory traj = ik_seed(spec, standing_configuration(model));
  seed_centroidal(spec, traj);

  for (int k = 0; k < traj.num_knots(); k += 11) {
    EXPECT_LT((traj.com[k] - center_of_mass(model, traj.q[k])).norm(), 1e-12);
    const MatX A = centroidal_momentum_matrix(model, traj.q[k]);
    EXPECT_LT((traj.ang_mom[k] - A.bottomRows<3>() * traj.v[k]).norm(), 1e-12);
    EXPECT_LT((traj.com_vel[k] -
               A.topRows<3>() * traj.v[k] / model.total_mass).norm(),
              1e-12);
  }
}

}  // namespace
