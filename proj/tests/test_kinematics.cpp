#include <gtest/gtest.h>

#include <random>

#include "kickplan/kinematics.hpp"
#include "support/test_models.hpp"

using namespace kickplan;
namespace kt = kickplan::testing;

namespace {

TEST(ForwardKinematics, ZeroConfigurationGivesNominalOffsets) {
  RobotModel m = kt::three_link_chain();
  FkResult fk = forward_kinematics(m, kt::neutral_configuration(m));
  EXPECT_TRUE(fk.position[0].isZero(1e-15));
  EXPECT_TRUE(fk.position[1].isApprox(Vec3(0.1, 0.0, 0.2), 1e-15));
  EXPECT_TRUE(fk.position[2].isApprox(Vec3(0.35, 0.0, 0.2), 1e-15));
  EXPECT_TRUE(fk.position[3].isApprox(Vec3(0.57, 0.05, 0.2), 1e-15));
  for (int i = 0; i < 4; ++i)
    EXPECT_TRUE(fk.rotation[i].isIdentity(1e-15));
}

TEST(ForwardKinematics, BaseTranslationShiftsEveryLink) {
  RobotModel m = kt::three_link_chain();
  VecX q = kt::neutral_configuration(m);
  FkResult ref = forward_kinematics(m, q);
  q.head<3>() = Vec3(1, 2, 3);
  FkResult fk = forward_kinematics(m, q);
  for (int i = 0; i < m.num_links(); ++i)
    EXPECT_TRUE((fk.position[i] - ref.position[i]).isApprox(Vec3(1, 2, 3), 1e-14));
}

TEST(ForwardKinematics, PlanarArmHandComputed) {
  RobotModel m = kt::planar_arm();
  VecX q = kt::neutral_configuration(m);
  q[7] = M_PI / 2;  // shoulder
  q[8] = 0.0;       // elbow
  FkResult fk = forward_kinematics(m, q);
  const Vec3 hand = keypoint_position(m, fk, 0);
  EXPECT_TRUE(hand.isApprox(Vec3(0, 0, 1.0), 1e-12));
}

TEST(ForwardKinematics, RigidBaseTransformEquivariance) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(17);
  VecX q = kt::random_configuration(m, rng);
  FkResult fk = forward_kinematics(m, q);

  const Quat extra = Quat(Eigen::AngleAxisd(0.7, Vec3(1, 2, -1).normalized()));
  const Vec3 shift(0.4, -0.9, 0.2);
  VecX q2 = q;
  q2.head<3>() = extra * q.head<3>() + shift;
  const Quat rotated = extra * quat_from_config(q).normalized();
  q2[3] = rotated.w();
  q2[4] = rotated.x();
  q2[5] = rotated.y();
  q2[6] = rotated.z();
  FkResult fk2 = forward_kinematics(m, q2);
  for (int i = 0; i < m.num_links(); ++i) {
    EXPECT_TRUE(fk2.position[i].isApprox(extra * fk.position[i] + shift, 1e-12));
    EXPECT_TRUE(
        fk2.rotation[i].isApprox(extra.toRotationMatrix() * fk.rotation[i], 1e-12));
  }
}

TEST(PointJacobian, BaseTranslationBlockIsIdentity) {
  RobotModel m = kt::three_link_chain();
  FkResult fk = forward_kinematics(m, kt::neutral_configuration(m));
  MatX J = point_jacobian(m, fk, 3, Vec3(0.2, 0, 0));
  const Mat3 top_left = J.block<3, 3>(0, 0);
  EXPECT_TRUE(top_left.isIdentity(1e-15));
}

TEST(PointJacobian, RootPointZeroRatesMovesWithBase) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(5);
  VecX q = kt::random_configuration(m, rng);
  FkResult fk = forward_kinematics(m, q);
  MatX J = point_jacobian(m, fk, 0, Vec3::Zero());
  VecX v = VecX::Zero(m.nv());
  v.head<3>() = Vec3(0.5, -0.2, 0.9);
  EXPECT_TRUE((J * v).isApprox(Vec3(0.5, -0.2, 0.9), 1e-14));
}

// J v against (FK(q (+) v dt) - FK(q)) / dt on 100 random configurations.
TEST(PointJacobian, MatchesFiniteDifferences) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(23);
  const double dt = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    VecX q = kt::random_configuration(m, rng);
    VecX v = kt::random_velocity(m, rng);
    FkResult fk = forward_kinematics(m, q);
    for (int link : {1, 3}) {
      const Vec3 offset(0.1, -0.05, 0.02);
      MatX J = point_jacobian(m, fk, link, offset);
      FkResult fk2 = forward_kinematics(m, integrate_configuration(q, v, dt));
      Vec3 fd = (world_point(fk2, link, offset) - world_point(fk, link, offset)) / dt;
      EXPECT_LT((J * v - fd).norm(), 1e-5);
    }
  }
}

TEST(CenterOfMass, SingleLink) {
  RobotModel m = kt::single_body(2.0);
  std::mt19937 rng(2);
  VecX q = kt::random_configuration(m, rng);
  FkResult fk = forward_kinematics(m, q);
  EXPECT_TRUE(center_of_mass(m, fk).isApprox(world_point(fk, 0, Vec3::Zero()), 1e-14));
}

TEST(CenterOfMass, TwoEqualPointMassesAverage) {
  nlohmann::json doc;
  doc["links"] = {kt::base_link_json("base", 0.0),
                  kt::base_link_json("a", 1.0), kt::base_link_json("b", 1.0)};
  doc["links"][0]["inertia"] = {0, 0, 0, 0, 0, 0};
  doc["links"][1]["inertia"] = {0, 0, 0, 0, 0, 0};
  doc["links"][2]["inertia"] = {0, 0, 0, 0, 0, 0};
  doc["joints"] = {kt::base_joint_json(),
                   kt::revolute_json("ja", 0, Vec3(0, 0, 0), Vec3(0, 0, 1)),
                   kt::revolute_json("jb", 0, Vec3(1, 0, 0), Vec3(0, 0, 1))};
  RobotModel m = load_model(doc);
  FkResult fk = forward_kinematics(m, kt::neutral_configuration(m));
  EXPECT_TRUE(center_of_mass(m, fk).isApprox(Vec3(0.5, 0, 0), 1e-14));
}

TEST(CenterOfMass, JacobianMatchesFiniteDifferences) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(31);
  const double dt = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    VecX q = kt::random_configuration(m, rng);
    VecX v = kt::random_velocity(m, rng);
    FkResult fk = forward_kinematics(m, q);
    MatX J = com_jacobian(m, fk);
    Vec3 fd = (center_of_mass(m, integrate_configuration(q, v, dt)) -
               center_of_mass(m, fk)) / dt;
    EXPECT_LT((J * v - fd).norm(), 1e-5);
  }
}

TEST(CentroidalMomentum, SingleRigidBodyAngular) {
  RobotModel m = kt::single_body(2.0, Vec3(0.1, 0.2, 0.3));
  std::mt19937 rng(41);
  VecX q = kt::random_configuration(m, rng);
  FkResult fk = forward_kinematics(m, q);
  VecX v = VecX::Zero(6);
  const Vec3 omega_body(0.7, -0.4, 1.1);
  v.segment<3>(3) = omega_body;
  const VecX h6 = centroidal_momentum_matrix(m, fk) * v;
  const Mat3 R = fk.rotation[0];
  const Vec3 expected = R * m.links[0].inertia * omega_body;  // R I R^T (R w_b)
  EXPECT_TRUE(h6.tail<3>().isApprox(expected, 1e-12));
  EXPECT_LT(h6.head<3>().norm(), 1e-12);
}

TEST(CentroidalMomentum, ZeroVelocityZeroMomentum) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(43);
  VecX q = kt::random_configuration(m, rng);
  VecX h6 = centroidal_momentum_matrix(m, q) * VecX::Zero(m.nv());
  EXPECT_LT(h6.norm(), 1e-15);
}

// Brute-force oracle: per-link velocities from central finite differences of
// the forward kinematics, momenta summed about the CoM.
TEST(CentroidalMomentum, MatchesBruteForceSummation) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(47);
  const double h = 1e-5;
  for (int trial = 0; trial < 25; ++trial) {
    VecX q = kt::random_configuration(m, rng);
    VecX v = kt::random_velocity(m, rng);
    FkResult fk = forward_kinematics(m, q);
    FkResult fkp = forward_kinematics(m, integrate_configuration(q, v, h));
    FkResult fkm = forward_kinematics(m, integrate_configuration(q, v, -h));

    const Vec3 r = center_of_mass(m, fk);
    Vec3 h_ref = Vec3::Zero();
    for (int i = 0; i < m.num_links(); ++i) {
      const Link& link = m.links[i];
      const Vec3 p = world_point(fk, i, link.com_offset);
      const Vec3 pdot = (world_point(fkp, i, link.com_offset) -
                         world_point(fkm, i, link.com_offset)) / (2 * h);
      const Mat3 Rdot = (fkp.rotation[i] - fkm.rotation[i]) / (2 * h);
      const Mat3 omega_hat = Rdot * fk.rotation[i].transpose();
      const Vec3 omega(omega_hat(2, 1), omega_hat(0, 2), omega_hat(1, 0));
      h_ref += (p - r).cross(link.mass * pdot) +
               fk.rotation[i] * link.inertia * fk.rotation[i].transpose() * omega;
    }
    const VecX h6 = centroidal_momentum_matrix(m, fk) * v;
    EXPECT_LT((h6.tail<3>() - h_ref).norm(), 1e-8);
    // Linear rows: m rdot = A_lin v.
    const Vec3 rdot = (center_of_mass(m, fkp) - center_of_mass(m, fkm)) / (2 * h);
    EXPECT_LT((h6.head<3>() - m.total_mass * rdot).norm(), 1e-8);
  }
}

// Raw-configuration Jacobians against plain central differences in q space.
TEST(ConfigurationJacobians, MatchCentralDifferences) {
  RobotModel m = kt::three_link_chain();
  std::mt19937 rng(53);
  const double h = 1e-6;
  for (int trial = 0; trial < 30; ++trial) {
    VecX q = kt::random_configuration(m, rng);
    FkResult fk = forward_kinematics(m, q);
    const Vec3 offset(0.15, 0.02, -0.05);
    MatX Jp = point_jacobian_q(m, fk, 3, offset);
    MatX Jc = com_jacobian_q(m, fk);
    for (int c = 0; c < m.nq(); ++c) {
      VecX qp = q, qm = q;
      qp[c] += h;
      qm[c] -= h;
      const Vec3 fdp = (world_point(forward_kinematics(m, qp), 3, offset) -
                        world_point(forward_kinematics(m, qm), 3, offset)) / (2 * h);
      const Vec3 fdc =
          (center_of_mass(m, qp) - center_of_mass(m, qm)) / (2 * h);
      EXPECT_LT((Jp.col(c) - fdp).norm(), 1e-5);
      EXPECT_LT((Jc.col(c) - fdc).norm(), 1e-5);
    }
  }
}

}  // namespace
