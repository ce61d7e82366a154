#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kickplan/dynamics.hpp"
#include "kickplan/geometry.hpp"
#include "kickplan/kinematics.hpp"
#include "kickplan/mocap.hpp"
#include "kickplan/model.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

// ---------------------------------------------------------------------------
// Trajectory container and variable layout
// ---------------------------------------------------------------------------

enum class Stage { kKinematic, kFull };

/// Knot-point trajectory: whole-body states plus the centroidal quantities
/// and per-point contact positions/forces used by the dynamics stage.
struct KinodynamicTrajectory {
  double dt = 0.0;
  std::vector<VecX> q;             // [N] x nq
  std::vector<VecX> v;             // [N] x nv
  std::vector<Vec3> com;           // r
  std::vector<Vec3> com_vel;       // r-dot
  std::vector<Vec3> com_acc;       // r-ddot
  std::vector<Vec3> ang_mom;       // h
  std::vector<Vec3> ang_mom_rate;  // h-dot
  std::vector<std::vector<Vec3>> contact_pos;    // [N][nc]
  std::vector<std::vector<Vec3>> contact_force;  // [N][nc]

  int num_knots() const { return static_cast<int>(q.size()); }
  double time(int k) const { return k * dt; }
};

/// Flat decision-variable layout. Per knot, the kinematic stage packs
/// (q, v); the full stage appends (r, r-dot, r-ddot, h, h-dot, c_i, f_i).
struct VariableLayout {
  int knots = 0, nq = 0, nv = 0, nc = 0;
  Stage stage = Stage::kKinematic;

  int per_knot() const {
    return nq + nv + (stage == Stage::kFull ? 15 + 6 * nc : 0);
  }
  int size() const { return knots * per_knot(); }
  int q(int k) const { return k * per_knot(); }
  int v(int k) const { return q(k) + nq; }
  int com(int k) const { return v(k) + nv; }
  int com_vel(int k) const { return com(k) + 3; }
  int com_acc(int k) const { return com(k) + 6; }
  int ang_mom(int k) const { return com(k) + 9; }
  int ang_mom_rate(int k) const { return com(k) + 12; }
  int contact_pos(int k, int i) const { return com(k) + 15 + 3 * i; }
  int contact_force(int k, int i) const {
    return com(k) + 15 + 3 * (nc + i);
  }
};

inline VecX pack_trajectory(const KinodynamicTrajectory& traj,
                            const VariableLayout& lay) {
  VecX x = VecX::Zero(lay.size());
  for (int k = 0; k < lay.knots; ++k) {
    x.segment(lay.q(k), lay.nq) = traj.q[k];
    x.segment(lay.v(k), lay.nv) = traj.v[k];
    if (lay.stage == Stage::kFull) {
      x.segment<3>(lay.com(k)) = traj.com[k];
      x.segment<3>(lay.com_vel(k)) = traj.com_vel[k];
      x.segment<3>(lay.com_acc(k)) = traj.com_acc[k];
      x.segment<3>(lay.ang_mom(k)) = traj.ang_mom[k];
      x.segment<3>(lay.ang_mom_rate(k)) = traj.ang_mom_rate[k];
      for (int i = 0; i < lay.nc; ++i) {
        x.segment<3>(lay.contact_pos(k, i)) = traj.contact_pos[k][i];
        x.segment<3>(lay.contact_force(k, i)) = traj.contact_force[k][i];
      }
    }
  }
  return x;
}

inline KinodynamicTrajectory unpack_trajectory(const VecX& x,
                                               const VariableLayout& lay,
                                               double dt) {
  KinodynamicTrajectory traj;
  traj.dt = dt;
  for (int k = 0; k < lay.knots; ++k) {
    traj.q.push_back(x.segment(lay.q(k), lay.nq));
    traj.v.push_back(x.segment(lay.v(k), lay.nv));
    if (lay.stage == Stage::kFull) {
      traj.com.push_back(x.segment<3>(lay.com(k)));
      traj.com_vel.push_back(x.segment<3>(lay.com_vel(k)));
      traj.com_acc.push_back(x.segment<3>(lay.com_acc(k)));
      traj.ang_mom.push_back(x.segment<3>(lay.ang_mom(k)));
      traj.ang_mom_rate.push_back(x.segment<3>(lay.ang_mom_rate(k)));
      traj.contact_pos.emplace_back();
      traj.contact_force.emplace_back();
      for (int i = 0; i < lay.nc; ++i) {
        traj.contact_pos.back().push_back(x.segment<3>(lay.contact_pos(k, i)));
        traj.contact_force.back().push_back(
            x.segment<3>(lay.contact_force(k, i)));
      }
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Generic sparse NLP: smooth costs plus bounded residual blocks l <= c <= u.
// ---------------------------------------------------------------------------

/// A vector-valued constraint over a small index subset of x. Equal lower
/// and upper bounds make a component an equality.
struct ResidualBlock {
  std::string name;
  std::vector<int> xidx;
  std::function<VecX(const VecX& xs)> eval;  // takes the gathered subvector
  VecX lower, upper;
  std::function<MatX(const VecX& xs)> jac;  // optional analytic Jacobian
  bool linear = false;  // Jacobian is constant: computed once and cached
  mutable std::optional<MatX> cached_jac;
};

/// A smooth scalar cost over an index subset, with gradient. Terms of the
/// form weight * ||r(x)||^2 may expose the residual and its Jacobian so the
/// solver can build a Gauss-Newton curvature model; `eval` stays
/// authoritative for the value and gradient.
struct CostTerm {
  std::string name;
  std::vector<int> xidx;
  std::function<double(const VecX& xs, VecX* grad)> eval;
  std::function<VecX(const VecX& xs, MatX* jac)> residual;
  double res_weight = 0.0;
};

struct NlpProblem {
  int num_vars = 0;
  std::vector<CostTerm> costs;
  std::vector<ResidualBlock> blocks;
  VecX x0;

  VecX gather(const std::vector<int>& idx, const VecX& x) const {
    VecX xs(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) xs[i] = x[idx[i]];
    return xs;
  }

  double cost(const VecX& x, VecX* grad = nullptr) const {
    if (grad) grad->setZero(num_vars);
    double total = 0.0;
    for (const CostTerm& c : costs) {
      const VecX xs = gather(c.xidx, x);
      if (!grad) {
        total += c.eval(xs, nullptr);
      } else {
        VecX g(xs.size());
        total += c.eval(xs, &g);
        for (size_t i = 0; i < c.xidx.size(); ++i) (*grad)[c.xidx[i]] += g[i];
      }
    }
    return total;
  }

  MatX block_jacobian(const ResidualBlock& b, const VecX& xs) const {
    if (b.linear && b.cached_jac) return *b.cached_jac;
    MatX J;
    if (b.jac) {
      J = b.jac(xs);
    } else {
      const double h = 1e-6;
      VecX xp = xs;
      const VecX c0 = b.eval(xs);
      J.resize(c0.size(), xs.size());
      for (int i = 0; i < xs.size(); ++i) {
        xp[i] = xs[i] + h;
        const VecX cp = b.eval(xp);
        xp[i] = xs[i] - h;
        const VecX cm = b.eval(xp);
        xp[i] = xs[i];
        J.col(i) = (cp - cm) / (2.0 * h);
      }
    }
    if (b.linear) b.cached_jac = J;
    return J;
  }

  /// Worst equality and inequality violation across all blocks.
  std::pair<double, double> constraint_violation(const VecX& x) const {
    double eq = 0.0, ineq = 0.0;
    for (const ResidualBlock& b : blocks) {
      const VecX c = b.eval(gather(b.xidx, x));
      for (int i = 0; i < c.size(); ++i) {
        const double viol =
            std::max({0.0, b.lower[i] - c[i], c[i] - b.upper[i]});
        if (b.lower[i] == b.upper[i])
          eq = std::max(eq, viol);
        else
          ineq = std::max(ineq, viol);
      }
    }
    return {eq, ineq};
  }
};

// ---------------------------------------------------------------------------
// Retargeting problem description
// ---------------------------------------------------------------------------

struct TrackingWeights {
  double reference = 10.0;   // keypoint tracking
  double impulse = 1.0;      // foot-speed shaping in the swing window
  double velocity = 1e-2;    // whole-body velocity regularizer
  double momentum = 1e-2;    // angular-momentum regularizer
  double acceleration = 0.1;  // centroidal acceleration regularizer
  double force = 1e-6;       // contact-force regularizer
  // Smoothness of each contact force across knots. The wrench rows leave a
  // large per-knot force null space; without curvature there the inner
  // solver crawls.
  double force_smooth = 1e-3;
};

struct ProblemSpec {
  RobotModel model;
  std::vector<std::vector<std::pair<int, Vec3>>> targets;  // [knot](kp, pos)
  ContactSchedule schedule;
  double dt = 1.0 / 30.0;
  TrackingWeights weights;
  double friction = 0.7;
  double ground_height = 0.0;
  Vec3 ball_position{0.35, -0.08, 0.11};
  Vec3 target_direction{1.0, 0.0, 0.0};
  double kick_speed = 2.0;      // target foot speed in the swing window [m/s]
  int kick_foot_link = -1;      // link driven toward the target kick speed
  int support_foot_link = -1;   // link anchoring the approach-angle test
  std::vector<int> locked_joints;  // joint indices frozen in [t_lock, t_impact]
  double approach_min = 24.0 * M_PI / 180.0;
  double approach_max = 43.0 * M_PI / 180.0;
  // Tightening factor for the torque proxy. The proxy maps contact forces
  // through the static Jacobian and ignores inertial torques, so it runs
  // with headroom; verification against full inverse dynamics still gates
  // the result.
  double torque_proxy_scale = 0.8;

  int num_knots() const { return schedule.num_knots(); }

  void validate() const {
    if (num_knots() < 2) throw ValidationError("problem needs at least two knots");
    if (dt <= 0.0) throw ValidationError("knot spacing must be positive");
    if (static_cast<int>(targets.size()) != num_knots())
      throw ValidationError("one reference-target set per knot is required");
    if (static_cast<int>(schedule.active.front().size()) !=
        model.num_contacts())
      throw ValidationError("schedule and model disagree on contact count");
    if (friction <= 0.0) throw ValidationError("friction must be positive");
    if (kick_foot_link < 0 || kick_foot_link >= model.num_links())
      throw ValidationError("kick foot link out of range");
    if (support_foot_link < 0 || support_foot_link >= model.num_links())
      throw ValidationError("support foot link out of range");
    if (std::abs(target_direction.norm() - 1.0) > 1e-6)
      throw ValidationError("target direction must be a unit vector");
    if (kick_speed < 0.0)
      throw ValidationError("kick speed must be non-negative");
    for (int j : locked_joints)
      if (j < 1 || j >= static_cast<int>(model.joints.size()))
        throw ValidationError("locked joint index out of range");
    if (torque_proxy_scale <= 0.0 || torque_proxy_scale > 1.0)
      throw ValidationError("torque proxy scale must lie in (0, 1]");
  }

  /// 1 inside the swing-to-impact window, else 0.
  double impulse_gate(int knot) const {
    const double t = knot * dt;
    return (t >= schedule.t_swing && t <= schedule.t_impact) ? 1.0 : 0.0;
  }
  bool ankle_locked(int knot) const {
    const double t = knot * dt;
    return t >= schedule.t_lock && t <= schedule.t_impact;
  }
};

inline VariableLayout make_layout(const ProblemSpec& spec, Stage stage) {
  VariableLayout lay;
  lay.knots = spec.num_knots();
  lay.nq = spec.model.nq();
  lay.nv = spec.model.nv();
  lay.nc = spec.model.num_contacts();
  lay.stage = stage;
  return lay;
}

namespace detail {

inline std::vector<int> range_idx(int start, int count) {
  std::vector<int> idx(count);
  for (int i = 0; i < count; ++i) idx[i] = start + i;
  return idx;
}

inline std::vector<int> concat_idx(std::vector<int> a,
                                   const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// weight * ||xs||^2 with the identity residual exposed for Gauss-Newton.
inline CostTerm norm_cost(std::string name, std::vector<int> idx, double w) {
  CostTerm c;
  c.name = std::move(name);
  c.xidx = std::move(idx);
  c.eval = [w](const VecX& xs, VecX* grad) {
    if (grad) *grad = 2.0 * w * xs;
    return w * xs.squaredNorm();
  };
  c.residual = [](const VecX& xs, MatX* jac) {
    if (jac) *jac = MatX::Identity(xs.size(), xs.size());
    return xs;
  };
  c.res_weight = w;
  return c;
}

///// Support-foot approach angle at a configuration: the ground-plane angle
/// between the foot-to-ball line and the kick direction.
inline double approach_angle(const RobotModel& model, const VecX& q,
                             const ProblemSpec& spec) {
  const FkResult fk = forward_kinematics(model, q);
  Vec3 to_ball = spec.ball_position - fk.position[spec.support_foot_link];
  to_ball.z() = 0.0;
  Vec3 dir = spec.target_direction;
  dir.z() = 0.0;
  if (to_ball.norm() < 1e-9 || dir.norm() < 1e-9) return 0.0;
  const double c =
      std::clamp(to_ball.normalized().dot(dir.normalized()), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Problem assembly
// ---------------------------------------------------------------------------

/// Assembles the transcription for one stage. The returned problem holds
/// references into `spec` (model, schedule), which must outlive it.
inline NlpProblem build_problem(const ProblemSpec& spec, Stage stage) {
  spec.validate();
  const RobotModel& model = spec.model;
  const VariableLayout lay = make_layout(spec, stage);
  const int N = lay.knots, nq = lay.nq, nv = lay.nv, nc = lay.nc;
  const int n = model.num_actuated();
  const double dt = spec.dt;
  const double mass = model.total_mass;
  const bool full = stage == Stage::kFull;

  NlpProblem nlp;
  nlp.num_vars = lay.size();

  auto eq = [](int m) { return VecX::Zero(m); };

  // ---- costs -------------------------------------------------------------

  for (int k = 0; k < N; ++k) {
    // Reference keypoint tracking.
    if (!spec.targets[k].empty()) {
      const auto targets = spec.targets[k];
      const double w = spec.weights.reference;
      auto res = [&model, targets](const VecX& qs, MatX* jac) {
        const FkResult fk = forward_kinematics(model, qs);
        VecX r(3 * targets.size());
        if (jac) jac->resize(3 * targets.size(), qs.size());
        for (size_t t = 0; t < targets.size(); ++t) {
          const auto& [kp, ref] = targets[t];
          r.segment<3>(3 * t) = keypoint_position(model, fk, kp) - ref;
          if (jac) {
            const Keypoint& key = model.keypoints[kp];
            jac->middleRows<3>(3 * t) =
                point_jacobian_q(model, fk, key.link, key.offset);
          }
        }
        return r;
      };
      nlp.costs.push_back(
          {"track_k" + std::to_string(k), detail::range_idx(lay.q(k), nq),
           [res, w](const VecX& qs, VecX* grad) {
             if (!grad) return w * res(qs, nullptr).squaredNorm();
             MatX J;
             const VecX r = res(qs, &J);
             *grad = 2.0 * w * (J.transpose() * r);
             return w * r.squaredNorm();
           },
           res, w});
    }

    // Foot-speed shaping inside the swing window (drive the foot toward the
    // target kick velocity; a pure speed reward is unbounded below and lets
    // the penalty subproblems diverge), and the complementary velocity
    // regularizer outside it.
    const double gate = full ? spec.impulse_gate(k) : 0.0;
    if (gate > 0.0) {
      const Vec3 target = spec.kick_speed * spec.target_direction;
      nlp.costs.push_back(
          {"impulse_k" + std::to_string(k),
           detail::concat_idx(detail::range_idx(lay.q(k), nq),
                              detail::range_idx(lay.v(k), nv)),
           [&model, nq, nv, link = spec.kick_foot_link, target,
            w = spec.weights.impulse * gate](const VecX& xs, VecX* grad) {
             const VecX qs = xs.head(nq), vs = xs.tail(nv);
             const MatX J = point_jacobian(model, qs, link, Vec3::Zero());
             const Vec3 r = J * vs - target;
             if (grad) {
               grad->setZero(nq + nv);
               grad->tail(nv) = 2.0 * w * (J.transpose() * r);
               // q-dependence of J by central differences.
               const double h = 1e-6;
               VecX qp = qs;
               for (int i = 0; i < nq; ++i) {
                 qp[i] = qs[i] + h;
                 const double cp =
                     (point_jacobian(model, qp, link, Vec3::Zero()) * vs -
                      target)
                         .squaredNorm();
                 qp[i] = qs[i] - h;
                 const double cm =
                     (point_jacobian(model, qp, link, Vec3::Zero()) * vs -
                      target)
                         .squaredNorm();
                 qp[i] = qs[i];
                 (*grad)[i] = w * (cp - cm) / (2.0 * h);
               }
             }
             return w * r.squaredNorm();
           },
           // Curvature model: the residual is linear in v at fixed q, which
           // is the direction the cost can otherwise exploit.
           [&model, nq, nv, link = spec.kick_foot_link, target](
               const VecX& xs, MatX* jac) {
             const VecX qs = xs.head(nq), vs = xs.tail(nv);
             const MatX J = point_jacobian(model, qs, link, Vec3::Zero());
             if (jac) {
               jac->setZero(3, nq + nv);
               jac->rightCols(nv) = J;
             }
             return VecX(J * vs - target);
           },
           spec.weights.impulse * gate});
    } else {
      nlp.costs.push_back(detail::norm_cost(
          "velocity_reg_k" + std::to_string(k),
          detail::range_idx(lay.v(k), nv), spec.weights.velocity));
    }

    if (full) {
      nlp.costs.push_back(detail::norm_cost(
          "momentum_reg_k" + std::to_string(k),
          detail::range_idx(lay.ang_mom(k), 3), spec.weights.momentum));
      // Without this the terminal accelerations, which no integration row
      // touches, drift to free fall so the force regularizer can zero the
      // contact forces.
      nlp.costs.push_back(detail::norm_cost(
          "acc_reg_k" + std::to_string(k),
          detail::range_idx(lay.com_acc(k), 3), spec.weights.acceleration));
      nlp.costs.push_back(detail::norm_cost(
          "mom_rate_reg_k" + std::to_string(k),
          detail::range_idx(lay.ang_mom_rate(k), 3),
          spec.weights.acceleration));
      nlp.costs.push_back(detail::norm_cost(
          "force_reg_k" + std::to_string(k),
          detail::range_idx(lay.contact_force(k, 0), 3 * nc),
          spec.weights.force));
      if (k + 1 < N) {
        const int m = 3 * nc;
        nlp.costs.push_back(
            {"force_smooth_k" + std::to_string(k),
             detail::concat_idx(
                 detail::range_idx(lay.contact_force(k, 0), m),
                 detail::range_idx(lay.contact_force(k + 1, 0), m)),
             [m, w = spec.weights.force_smooth](const VecX& xs, VecX* grad) {
               const VecX d = xs.tail(m) - xs.head(m);
               if (grad) {
                 grad->setZero(2 * m);
                 grad->head(m) = -2.0 * w * d;
                 grad->tail(m) = 2.0 * w * d;
               }
               return w * d.squaredNorm();
             },
             [m](const VecX& xs, MatX* jac) {
               if (jac) {
                 jac->setZero(m, 2 * m);
                 jac->leftCols(m) = -MatX::Identity(m, m);
                 jac->rightCols(m) = MatX::Identity(m, m);
               }
               return VecX(xs.tail(m) - xs.head(m));
             },
             spec.weights.force_smooth});
      }
    }
  }

  // ---- kinematic constraints ----------------------------------------------

  for (int k = 0; k < N; ++k) {
    // Unit quaternion.
    nlp.blocks.push_back({"quat_norm_k" + std::to_string(k),
                          detail::range_idx(lay.q(k) + 3, 4),
                          [](const VecX& s) {
                            return VecX::Constant(1, s.squaredNorm() - 1.0);
                          },
                          eq(1), eq(1)});

    // Joint position and velocity boxes (identity Jacobians).
    {
      VecX qlo(n), qhi(n), vlo(nv), vhi(nv);
      for (int j = 1; j <= n; ++j) {
        qlo[j - 1] = model.joints[j].q_min;
        qhi[j - 1] = model.joints[j].q_max;
      }
      vlo.head<6>().setConstant(-50.0);  // generous floating-base rates
      vhi.head<6>().setConstant(50.0);
      for (int j = 1; j <= n; ++j) {
        vlo[6 + j - 1] = model.joints[j].v_min;
        vhi[6 + j - 1] = model.joints[j].v_max;
      }
      auto identity = [](const VecX& s) { return s; };
      auto identity_jac = [](const VecX& s) {
        return MatX(MatX::Identity(s.size(), s.size()));
      };
      nlp.blocks.push_back({"q_limits_k" + std::to_string(k),
                            detail::range_idx(lay.q(k) + 7, n), identity, qlo,
                            qhi, identity_jac, true});
      nlp.blocks.push_back({"v_limits_k" + std::to_string(k),
                            detail::range_idx(lay.v(k), nv), identity, vlo,
                            vhi, identity_jac, true});
    }

    // Self-collision clearance per capsule pair.
    for (size_t p = 0; p < model.collision_pairs.size(); ++p) {
      const auto [la, lb] = model.collision_pairs[p];
      const double clearance =
          model.links[la].capsule->radius + model.links[lb].capsule->radius;
      nlp.blocks.push_back(
          {"collision_k" + std::to_string(k) + "_p" + std::to_string(p),
           detail::range_idx(lay.q(k), nq),
           [&model, la = la, lb = lb](const VecX& qs) {
             const FkResult fk = forward_kinematics(model, qs);
             return VecX::Constant(
                 1, segment_segment_distance(
                        world_capsule(model, fk, la).a,
                        world_capsule(model, fk, la).b,
                        world_capsule(model, fk, lb).a,
                        world_capsule(model, fk, lb).b));
           },
           VecX::Constant(1, clearance), VecX::Constant(1, 1e6)});
    }

    // Distal-joint lock around impact.
    if (spec.ankle_locked(k) && !spec.locked_joints.empty()) {
      std::vector<int> idx;
      for (int j : spec.locked_joints) idx.push_back(lay.v(k) + 6 + j - 1);
      nlp.blocks.push_back({"joint_lock_k" + std::to_string(k), idx,
                            [](const VecX& s) { return s; },
                            eq(static_cast<int>(idx.size())),
                            eq(static_cast<int>(idx.size())),
                            [](const VecX& s) {
                              return MatX(
                                  MatX::Identity(s.size(), s.size()));
                            },
                            true});
    }
  }

  // Pose integration between consecutive knots.
  for (int k = 0; k + 1 < N; ++k) {
    nlp.blocks.push_back(
        {"pose_integration_k" + std::to_string(k),
         detail::concat_idx(
             detail::concat_idx(detail::range_idx(lay.q(k), nq),
                                detail::range_idx(lay.v(k), nv)),
             detail::range_idx(lay.q(k + 1), nq)),
         [nq, nv, dt](const VecX& xs) {
           const VecX qk = xs.head(nq);
           const VecX vk = xs.segment(nq, nv);
           const VecX qn = xs.tail(nq);
           return configuration_difference(integrate_configuration(qk, vk, dt),
                                           qn);
         },
         eq(nv), eq(nv)});
  }

  // Approach angle of the support foot relative to the ball, initial knot.
  nlp.blocks.push_back({"approach_angle",
                        detail::range_idx(lay.q(0), nq),
                        [&model, &spec](const VecX& qs) {
                          return VecX::Constant(
                              1, detail::approach_angle(model, qs, spec));
                        },
                        VecX::Constant(1, spec.approach_min),
                        VecX::Constant(1, spec.approach_max)});

  // Contact kinematics: active points pinned to the ground plane and
  // stationary between consecutive active knots; inactive points above it.
  auto contact_height = [&model](int point) {
    return [&model, point](const VecX& qs) {
      const FkResult fk = forward_kinematics(model, qs);
      return VecX::Constant(1, contact_position(model, fk, point).z());
    };
  };
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < nc; ++i) {
      const bool active = spec.schedule.is_active(k, i);
      nlp.blocks.push_back(
          {"contact_height_k" + std::to_string(k) + "_c" + std::to_string(i),
           detail::range_idx(lay.q(k), nq), contact_height(i),
           VecX::Constant(1, spec.ground_height),
           VecX::Constant(1, active ? spec.ground_height : 1e6),
           [&model, i](const VecX& qs) {
             return MatX(point_jacobian_q(model, qs,
                                          model.contact_points[i].link,
                                          model.contact_points[i].offset)
                             .row(2));
           }});
      if (active && k + 1 < N && spec.schedule.is_active(k + 1, i)) {
        nlp.blocks.push_back(
            {"no_slip_k" + std::to_string(k) + "_c" + std::to_string(i),
             detail::concat_idx(detail::range_idx(lay.q(k), nq),
                                detail::range_idx(lay.q(k + 1), nq)),
             [&model, i, nq](const VecX& xs) {
               const FkResult fa = forward_kinematics(model, xs.head(nq));
               const FkResult fb = forward_kinematics(model, xs.tail(nq));
               return VecX(contact_position(model, fb, i) -
                           contact_position(model, fa, i));
             },
             eq(3), eq(3),
             [&model, i, nq](const VecX& xs) {
               MatX J(3, 2 * nq);
               const ContactPoint& cp = model.contact_points[i];
               J.leftCols(nq) = -point_jacobian_q(model, VecX(xs.head(nq)),
                                                  cp.link, cp.offset);
               J.rightCols(nq) = point_jacobian_q(model, VecX(xs.tail(nq)),
                                                  cp.link, cp.offset);
               return J;
             }});
      }
    }

  if (!full) return nlp;

  // ---- centroidal dynamics and consistency --------------------------------

  const Vec3 gravity(0, 0, -kGravity);
  // The dynamics rows live in force/moment units while everything else is
  // in meters and radians; left unscaled they dominate the penalty Hessian
  // by several orders of magnitude and the inner solver crawls. Normalize
  // them by characteristic loads (body weight, weight times a half-meter
  // lever, each joint's torque limit).
  const double f_scale = 1.0 / (mass * kGravity);
  const double m_scale = 1.0 / (mass * kGravity * 0.5);
  for (int k = 0; k < N; ++k) {
    // m r-ddot = sum f + m g  (linear).
    {
      std::vector<int> idx = detail::range_idx(lay.com_acc(k), 3);
      for (int i = 0; i < nc; ++i)
        idx = detail::concat_idx(idx,
                                 detail::range_idx(lay.contact_force(k, i), 3));
      nlp.blocks.push_back(
          {"newton_k" + std::to_string(k), idx,
           [mass, nc, gravity, f_scale](const VecX& xs) {
             Vec3 out = mass * Vec3(xs.head<3>()) - mass * gravity;
             for (int i = 0; i < nc; ++i)
               out -= Vec3(xs.segment<3>(3 + 3 * i));
             return VecX(f_scale * out);
           },
           eq(3), eq(3),
           [mass, nc, f_scale](const VecX&) {
             MatX J = MatX::Zero(3, 3 + 3 * nc);
             J.leftCols<3>() = mass * Mat3::Identity();
             for (int i = 0; i < nc; ++i)
               J.block<3, 3>(0, 3 + 3 * i) = -Mat3::Identity();
             return MatX(f_scale * J);
           },
           true});
    }

    // h-dot = sum (c_i - r) x f_i.
    {
      std::vector<int> idx =
          detail::concat_idx(detail::range_idx(lay.ang_mom_rate(k), 3),
                             detail::range_idx(lay.com(k), 3));
      for (int i = 0; i < nc; ++i) {
        idx = detail::concat_idx(idx,
                                 detail::range_idx(lay.contact_pos(k, i), 3));
        idx = detail::concat_idx(idx,
                                 detail::range_idx(lay.contact_force(k, i), 3));
      }
      nlp.blocks.push_back(
          {"euler_k" + std::to_string(k), idx,
           [nc, m_scale](const VecX& xs) {
             const Vec3 hd = xs.head<3>();
             const Vec3 r = xs.segment<3>(3);
             Vec3 out = hd;
             for (int i = 0; i < nc; ++i) {
               const Vec3 c = xs.segment<3>(6 + 6 * i);
               const Vec3 f = xs.segment<3>(9 + 6 * i);
               out -= (c - r).cross(f);
             }
             return VecX(m_scale * out);
           },
           eq(3), eq(3),
           [nc, m_scale](const VecX& xs) {
             MatX J = MatX::Zero(3, 6 + 6 * nc);
             J.leftCols<3>().setIdentity();
             const Vec3 r = xs.segment<3>(3);
             for (int i = 0; i < nc; ++i) {
               const Vec3 c = xs.segment<3>(6 + 6 * i);
               const Vec3 f = xs.segment<3>(9 + 6 * i);
               J.block<3, 3>(0, 3) += -skew(f);  // d/dr of -(c-r)xf
               J.block<3, 3>(0, 6 + 6 * i) = skew(f);
               J.block<3, 3>(0, 9 + 6 * i) = -skew(Vec3(c - r));
             }
             return MatX(m_scale * J);
           }});
    }

    // Consistency with the whole-body state.
    nlp.blocks.push_back(
        {"com_consistency_k" + std::to_string(k),
         detail::concat_idx(detail::range_idx(lay.q(k), nq),
                            detail::range_idx(lay.com(k), 3)),
         [&model, nq](const VecX& xs) {
           return VecX(Vec3(xs.tail<3>()) -
                       center_of_mass(model, VecX(xs.head(nq))));
         },
         eq(3), eq(3),
         [&model, nq](const VecX& xs) {
           MatX J(3, nq + 3);
           J.leftCols(nq) = -com_jacobian_q(model, VecX(xs.head(nq)));
           J.rightCols<3>().setIdentity();
           return J;
         }});

    nlp.blocks.push_back(
        {"com_vel_consistency_k" + std::to_string(k),
         detail::concat_idx(
             detail::concat_idx(detail::range_idx(lay.q(k), nq),
                                detail::range_idx(lay.v(k), nv)),
             detail::range_idx(lay.com_vel(k), 3)),
         [&model, nq, nv](const VecX& xs) {
           const MatX J = com_jacobian(model, VecX(xs.head(nq)));
           return VecX(Vec3(xs.tail<3>()) - Vec3(J * xs.segment(nq, nv)));
         },
         eq(3), eq(3),
         // Linear in (v, r-dot); only the q columns need differencing.
         [&model, nq, nv](const VecX& xs) {
           MatX J = MatX::Zero(3, nq + nv + 3);
           J.middleCols(nq, nv) = -com_jacobian(model, VecX(xs.head(nq)));
           J.rightCols<3>().setIdentity();
           const double h = 1e-6;
           VecX qp = xs.head(nq);
           for (int c = 0; c < nq; ++c) {
             qp[c] += h;
             const Vec3 vp = com_jacobian(model, qp) * xs.segment(nq, nv);
             qp[c] -= 2.0 * h;
             const Vec3 vm = com_jacobian(model, qp) * xs.segment(nq, nv);
             qp[c] = xs[c];
             J.col(c) = -(vp - vm) / (2.0 * h);
           }
           return J;
         }});

    nlp.blocks.push_back(
        {"ang_mom_consistency_k" + std::to_string(k),
         detail::concat_idx(
             detail::concat_idx(detail::range_idx(lay.q(k), nq),
                                detail::range_idx(lay.v(k), nv)),
             detail::range_idx(lay.ang_mom(k), 3)),
         [&model, nq, nv](const VecX& xs) {
           const MatX A = centroidal_momentum_matrix(model, VecX(xs.head(nq)));
           const VecX hv = A.bottomRows<3>() * xs.segment(nq, nv);
           return VecX(Vec3(xs.tail<3>()) - Vec3(hv));
         },
         eq(3), eq(3),
         [&model, nq, nv](const VecX& xs) {
           MatX J = MatX::Zero(3, nq + nv + 3);
           J.middleCols(nq, nv) =
               -centroidal_momentum_matrix(model, VecX(xs.head(nq)))
                    .bottomRows<3>();
           J.rightCols<3>().setIdentity();
           const double h = 1e-6;
           VecX qp = xs.head(nq);
           for (int c = 0; c < nq; ++c) {
             qp[c] += h;
             const Vec3 vp = centroidal_momentum_matrix(model, qp)
                                 .bottomRows<3>() *
                             xs.segment(nq, nv);
             qp[c] -= 2.0 * h;
             const Vec3 vm = centroidal_momentum_matrix(model, qp)
                                 .bottomRows<3>() *
                             xs.segment(nq, nv);
             qp[c] = xs[c];
             J.col(c) = -(vp - vm) / (2.0 * h);
           }
           return J;
         }});

    for (int i = 0; i < nc; ++i)
      nlp.blocks.push_back(
          {"contact_consistency_k" + std::to_string(k) + "_c" +
               std::to_string(i),
           detail::concat_idx(detail::range_idx(lay.q(k), nq),
                              detail::range_idx(lay.contact_pos(k, i), 3)),
           [&model, i, nq](const VecX& xs) {
             const FkResult fk = forward_kinematics(model, VecX(xs.head(nq)));
             return VecX(Vec3(xs.tail<3>()) - contact_position(model, fk, i));
           },
           eq(3), eq(3),
           [&model, i, nq](const VecX& xs) {
             MatX J(3, nq + 3);
             J.leftCols(nq) = -point_jacobian_q(
                 model, VecX(xs.head(nq)), model.contact_points[i].link,
                 model.contact_points[i].offset);
             J.rightCols<3>().setIdentity();
             return J;
           }});

    // Friction pyramid on active forces; zero force when inactive.
    for (int i = 0; i < nc; ++i) {
      const std::vector<int> fidx =
          detail::range_idx(lay.contact_force(k, i), 3);
      if (spec.schedule.is_active(k, i)) {
        const double mu = spec.friction;
        VecX lo(5), hi(5);
        lo << 0.0, -1e6, -1e6, -1e6, -1e6;
        hi << 1e6, 0.0, 0.0, 0.0, 0.0;
        nlp.blocks.push_back(
            {"friction_k" + std::to_string(k) + "_c" + std::to_string(i),
             fidx,
             [mu, f_scale](const VecX& f) {
               VecX c(5);
               c << f[2], f[0] - mu * f[2], -f[0] - mu * f[2],
                   f[1] - mu * f[2], -f[1] - mu * f[2];
               return VecX(f_scale * c);
             },
             lo, hi,
             [mu, f_scale](const VecX&) {
               MatX J(5, 3);
               J << 0, 0, 1, 1, 0, -mu, -1, 0, -mu, 0, 1, -mu, 0, -1, -mu;
               return MatX(f_scale * J);
             },
             true});
      } else {
        nlp.blocks.push_back(
            {"no_force_k" + std::to_string(k) + "_c" + std::to_string(i),
             fidx, [](const VecX& f) { return f; }, eq(3), eq(3),
             [](const VecX&) { return MatX(MatX::Identity(3, 3)); }, true});
      }
    }

    // Joint-torque proxy from the contact wrench map.
    {
      std::vector<int> idx = detail::range_idx(lay.q(k), nq);
      for (int i = 0; i < nc; ++i)
        idx = detail::concat_idx(idx,
                                 detail::range_idx(lay.contact_force(k, i), 3));
      VecX lo(n), hi(n), lim(n);
      for (int j = 1; j <= n; ++j) {
        lim[j - 1] = std::max(std::abs(model.joints[j].tau_min),
                              std::abs(model.joints[j].tau_max));
        lo[j - 1] = spec.torque_proxy_scale * model.joints[j].tau_min /
                    lim[j - 1];
        hi[j - 1] = spec.torque_proxy_scale * model.joints[j].tau_max /
                    lim[j - 1];
      }
      // Rows are normalized by each joint's torque limit so a violation of
      // 1e-4 means the same fraction of budget at the hip as at the toe.
      auto proxy = [&model, nq, nc, n, lim](const VecX& xs) {
        const VecX qs = xs.head(nq);
        const FkResult fk = forward_kinematics(model, qs);
        VecX tau = VecX::Zero(n);
        for (int i = 0; i < nc; ++i) {
          const Vec3 f = xs.segment<3>(nq + 3 * i);
          const MatX J = point_jacobian(
              model, fk, model.contact_points[i].link,
              model.contact_points[i].offset);
          tau -= (J.transpose() * f).tail(n);
        }
        return VecX(tau.cwiseQuotient(lim));
      };
      nlp.blocks.push_back(
          {"torque_proxy_k" + std::to_string(k), idx, proxy, lo, hi,
           [&model, nq, nc, n, lim, proxy](const VecX& xs) {
             MatX J = MatX::Zero(n, nq + 3 * nc);
             const VecX qs = xs.head(nq);
             const FkResult fk = forward_kinematics(model, qs);
             for (int i = 0; i < nc; ++i) {
               const MatX Jp = point_jacobian(
                   model, fk, model.contact_points[i].link,
                   model.contact_points[i].offset);
               J.block(0, nq + 3 * i, n, 3) =
                   -Jp.rightCols(n).transpose();
             }
             J.array().colwise() /= lim.array();
             // q columns by central differences of the whole map.
             const double h = 1e-6;
             VecX xp = xs;
             for (int c = 0; c < nq; ++c) {
               xp[c] = xs[c] + h;
               const VecX tp = proxy(xp);
               xp[c] = xs[c] - h;
               const VecX tm = proxy(xp);
               xp[c] = xs[c];
               J.col(c) = (tp - tm) / (2.0 * h);
             }
             return J;
           }});
    }
  }

  // Euler integration of the centroidal state between knots (linear).
  for (int k = 0; k + 1 < N; ++k) {
    auto euler_pair = [&](const std::string& name, int at_k, int rate_k,
                          int at_next) {
      nlp.blocks.push_back(
          {name + "_k" + std::to_string(k),
           detail::concat_idx(
               detail::concat_idx(detail::range_idx(at_k, 3),
                                  detail::range_idx(rate_k, 3)),
               detail::range_idx(at_next, 3)),
           [dt](const VecX& xs) {
             return VecX(Vec3(xs.tail<3>()) - Vec3(xs.head<3>()) -
                         dt * Vec3(xs.segment<3>(3)));
           },
           eq(3), eq(3),
           [dt](const VecX&) {
             MatX J(3, 9);
             J << -Mat3::Identity(), -dt * Mat3::Identity(), Mat3::Identity();
             return J;
           },
           true});
    };
    euler_pair("com_integration", lay.com(k), lay.com_vel(k), lay.com(k + 1));
    euler_pair("com_vel_integration", lay.com_vel(k), lay.com_acc(k),
               lay.com_vel(k + 1));
    euler_pair("ang_mom_integration", lay.ang_mom(k), lay.ang_mom_rate(k),
               lay.ang_mom(k + 1));
  }

  return nlp;
}

}  // namespace kickplan
