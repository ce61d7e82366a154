#pragma once

#include <cmath>
#include <vector>

#include "kickplan/kinematics.hpp"
#include "kickplan/model.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

/// Tracking reward weights. Scale factors are negative so each component
/// decays from its weight at zero error.
struct RewardWeights {
  double w_keypoint = 0.25;
  double w_joint = 0.25;
  double w_joint_vel = 0.1;
  double w_com = 0.25;
  double w_ball = 1.0;
  double k_keypoint = -2.0;
  double k_joint = -2.0;
  double k_joint_vel = -2.0;
  double k_com = -2.0;

  void validate() const {
    if (w_keypoint < 0 || w_joint < 0 || w_joint_vel < 0 || w_com < 0 ||
        w_ball < 0)
      throw ValidationError("reward weights must be non-negative");
    if (k_keypoint >= 0 || k_joint >= 0 || k_joint_vel >= 0 || k_com >= 0)
      throw ValidationError("reward scale factors must be strictly negative");
  }
};

struct RewardComponents {
  double keypoint = 0.0;
  double joint = 0.0;
  double com = 0.0;
  double total() const { return keypoint + joint + com; }
};

struct RobotState {
  VecX q;
  VecX v;
};

inline RewardComponents reward_imitation(const RobotState& state,
                                         const RobotState& reference,
                                         const RobotModel& model,
                                         const RewardWeights& w) {
  w.validate();
  const FkResult fk = forward_kinematics(model, state.q);
  const FkResult fk_ref = forward_kinematics(model, reference.q);
  double keypoint_err = 0.0;
  for (int k = 0; k < static_cast<int>(model.keypoints.size()); ++k)
    keypoint_err +=
        (keypoint_position(model, fk_ref, k) - keypoint_position(model, fk, k))
            .norm();
  RewardComponents r;
  r.keypoint = w.w_keypoint * std::exp(w.k_keypoint * keypoint_err);
  r.joint = w.w_joint * std::exp(w.k_joint * (reference.q - state.q).norm()) +
            w.w_joint_vel *
                std::exp(w.k_joint_vel * (reference.v - state.v).norm());
  r.com = w.w_com * std::exp(w.k_com * (center_of_mass(model, fk_ref) -
                                        center_of_mass(model, fk)).norm());
  return r;
}

/// Ball-strike reward: zero unless the ball moves toward the target, then
/// strictly increasing in the along-target speed.
inline double reward_ball(const Vec3& v_ball, const Vec3& n_target,
                          double w_ball) {
  if (std::abs(n_target.norm() - 1.0) > 1e-6)
    throw ValidationError("target direction must be a unit vector");
  return w_ball * (std::exp(std::max(0.0, v_ball.dot(n_target))) - 1.0);
}

/// tau = kp (q_des - q) - kd v, clamped per joint to the model torque limits.
inline VecX pd_torque(const RobotModel& model, const VecX& q_des,
                      const VecX& q, const VecX& v, const VecX& kp,
                      const VecX& kd) {
  const int n = model.num_actuated();
  if (q_des.size() != n || q.size() != n || v.size() != n ||
      kp.size() != n || kd.size() != n)
    throw ValidationError("pd_torque: vector lengths must equal the joint count");
  VecX tau(n);
  for (int j = 0; j < n; ++j) {
    const Joint& joint = model.joints[j + 1];
    tau[j] = std::clamp(kp[j] * (q_des[j] - q[j]) - kd[j] * v[j],
                        joint.tau_min, joint.tau_max);
  }
  return tau;
}

/// Observation layout: reference states at three lookahead times (clamped to
/// the final frame), then the current (q, v), then the previous action.
inline VecX assemble_observation(const std::vector<RobotState>& reference,
                                 double reference_rate, double t,
                                 const RobotState& current,
                                 const VecX& previous_action,
                                 const std::vector<double>& lookaheads =
                                     {0.02, 0.68, 1.34}) {
  if (t < 0.0) throw ValidationError("observation time must be non-negative");
  if (reference.empty()) throw ValidationError("empty reference trajectory");
  const int nq = static_cast<int>(current.q.size());
  const int nv = static_cast<int>(current.v.size());
  const int state_dim = nq + nv;
  VecX obs(static_cast<int>(lookaheads.size()) * state_dim + state_dim +
           previous_action.size());
  int at = 0;
  for (double dt : lookaheads) {
    const int idx =
        std::min(static_cast<int>(std::lround((t + dt) * reference_rate)),
                 static_cast<int>(reference.size()) - 1);
    obs.segment(at, nq) = reference[idx].q;
    obs.segment(at + nq, nv) = reference[idx].v;
    at += state_dim;
  }
  obs.segment(at, nq) = current.q;
  obs.segment(at + nq, nv) = current.v;
  at += state_dim;
  obs.segment(at, previous_action.size()) = previous_action;
  return obs;
}

/// Staircase schedule for the reference-guided early-termination threshold.
struct RetSchedule {
  double d_max = 0.30;  // m
  double d_min = 0.10;  // m
  double t_start = 0.0;  // steps
  double t_end = 1.0;
  int stairs = 1;
  double gamma = 20.0;  // smoothness

  void validate() const {
    if (!(d_max > d_min && d_min > 0.0))
      throw ValidationError("RET schedule needs d_max > d_min > 0");
    if (!(t_end > t_start)) throw ValidationError("RET schedule needs t_end > t_start");
    if (stairs < 1) throw ValidationError("RET schedule needs at least one stair");
    if (gamma <= 0.0) throw ValidationError("RET smoothness must be positive");
  }
};

/// Piecewise staircase threshold: d_max before t_start, d_min from t_end on,
/// a sum of logistic steps in between.
inline double ret_threshold(double t, const RetSchedule& s) {
  s.validate();
  if (t < s.t_start) return s.d_max;
  if (t >= s.t_end) return s.d_min;
  const double stair_height = (s.d_max - s.d_min) / s.stairs;
  const double stair_dt = (s.t_end - s.t_start) / s.stairs;
  double d = s.d_max;
  for (int i = 1; i <= s.stairs; ++i) {
    const double x = s.gamma * (t - (s.t_start + i * stair_dt)) / stair_dt;
    d -= stair_height / (1.0 + std::exp(-x));
  }
  return d;
}

/// True iff any link in `links` deviates from the reference by more than the
/// threshold.
inline bool should_terminate(const RobotState& state,
                             const RobotState& reference,
                             const RobotModel& model,
                             const std::vector<int>& links, double threshold) {
  if (links.empty()) throw ValidationError("termination link set is empty");
  const FkResult fk = forward_kinematics(model, state.q);
  const FkResult fk_ref = forward_kinematics(model, reference.q);
  for (int link : links)
    if ((fk.position[link] - fk_ref.position[link]).norm() > threshold)
      return true;
  return false;
}

/// Default termination link set: every link that carries a keypoint.
inline std::vector<int> keypoint_links(const RobotModel& model) {
  std::vector<int> links;
  for (const Keypoint& k : model.keypoints)
    if (std::find(links.begin(), links.end(), k.link) == links.end())
      links.push_back(k.link);
  return links;
}

}  // namespace kickplan
