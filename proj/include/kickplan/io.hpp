#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kickplan/kinematics.hpp"
#include "kickplan/mocap.hpp"
#include "kickplan/model.hpp"
#include "kickplan/pipeline.hpp"
#include "kickplan/solver.hpp"
#include "kickplan/transcription.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

inline constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit over a byte string; stable across platforms.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_hex(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return std::string(buf);
}

/// Hash of the canonical model serialization.
inline std::string model_hash(const RobotModel& model) {
  return hash_hex(serialize_model(model).dump());
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json ovec_json(const VecX& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::ordered_json ovec3_json(const Vec3& v) {
  return nlohmann::ordered_json::array({v.x(), v.y(), v.z()});
}

inline VecX vec_from_json(const nlohmann::json& a) {
  VecX v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

inline Vec3 vec3_from_json(const nlohmann::json& a) {
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory serialization
// ---------------------------------------------------------------------------

/// Per-knot records (t, q, v, r, r-dot, r-ddot, h, h-dot, c, f) plus
/// metadata. `config_hash` identifies the run configuration so outputs are
/// traceable; identical inputs give byte-identical files.
inline nlohmann::ordered_json trajectory_to_json(
    const KinodynamicTrajectory& traj, const ContactSchedule& schedule,
    const std::string& model_hash_hex, const std::string& config_hash_hex) {
  nlohmann::ordered_json doc;
  doc["version"] = kToolVersion;
  doc["model_hash"] = model_hash_hex;
  doc["config_hash"] = config_hash_hex;
  doc["dt"] = traj.dt;
  doc["num_knots"] = traj.num_knots();

  nlohmann::ordered_json sched;
  sched["t_swing"] = schedule.t_swing;
  sched["t_lock"] = schedule.t_lock;
  sched["t_impact"] = schedule.t_impact;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& knot : schedule.active) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (bool b : knot) row.push_back(b ? 1 : 0);
    rows.push_back(row);
  }
  sched["active"] = rows;
  doc["schedule"] = sched;

  const bool full = !traj.com.empty();
  nlohmann::ordered_json knots = nlohmann::ordered_json::array();
  for (int k = 0; k < traj.num_knots(); ++k) {
    nlohmann::ordered_json rec;
    rec["t"] = traj.time(k);
    rec["q"] = detail::ovec_json(traj.q[k]);
    rec["v"] = detail::ovec_json(traj.v[k]);
    if (full) {
      rec["r"] = detail::ovec3_json(traj.com[k]);
      rec["r_dot"] = detail::ovec3_json(traj.com_vel[k]);
      rec["r_ddot"] = detail::ovec3_json(traj.com_acc[k]);
      rec["h"] = detail::ovec3_json(traj.ang_mom[k]);
      rec["h_dot"] = detail::ovec3_json(traj.ang_mom_rate[k]);
      nlohmann::ordered_json c = nlohmann::ordered_json::array();
      nlohmann::ordered_json f = nlohmann::ordered_json::array();
      for (const Vec3& p : traj.contact_pos[k]) c.push_back(detail::ovec3_json(p));
      for (const Vec3& w : traj.contact_force[k]) f.push_back(detail::ovec3_json(w));
      rec["c"] = c;
      rec["f"] = f;
    }
    knots.push_back(rec);
  }
  doc["knots"] = knots;
  return doc;
}

inline KinodynamicTrajectory trajectory_from_json(const nlohmann::json& doc) {
  KinodynamicTrajectory traj;
  traj.dt = doc.at("dt").get<double>();
  for (const auto& rec : doc.at("knots")) {
    traj.q.push_back(detail::vec_from_json(rec.at("q")));
    traj.v.push_back(detail::vec_from_json(rec.at("v")));
    if (rec.contains("r")) {
      traj.com.push_back(detail::vec3_from_json(rec.at("r")));
      traj.com_vel.push_back(detail::vec3_from_json(rec.at("r_dot")));
      traj.com_acc.push_back(detail::vec3_from_json(rec.at("r_ddot")));
      traj.ang_mom.push_back(detail::vec3_from_json(rec.at("h")));
      traj.ang_mom_rate.push_back(detail::vec3_from_json(rec.at("h_dot")));
      traj.contact_pos.emplace_back();
      traj.contact_force.emplace_back();
      for (const auto& p : rec.at("c"))
        traj.contact_pos.back().push_back(detail::vec3_from_json(p));
      for (const auto& w : rec.at("f"))
        traj.contact_force.back().push_back(detail::vec3_from_json(w));
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const SolveReport& r) {
  nlohmann::ordered_json doc;
  doc["converged"] = r.converged;
  doc["outer_iterations"] = r.outer_iterations;
  doc["inner_iterations"] = r.inner_iterations;
  doc["cost"] = r.cost;
  doc["eq_violation"] = r.eq_violation;
  doc["ineq_violation"] = r.ineq_violation;
  doc["stationarity"] = r.stationarity;
  doc["penalty"] = r.penalty;
  doc["message"] = r.message;
  return doc;
}

inline nlohmann::ordered_json torque_report_to_json(const TorqueReport& r) {
  nlohmann::ordered_json doc;
  doc["feasible"] = r.feasible;
  doc["max_ratio"] = r.max_ratio;
  doc["base_wrench_norm"] = r.base_wrench_norm;
  doc["peak_torque"] = detail::ovec_json(r.peak_torque);
  nlohmann::ordered_json v = nlohmann::ordered_json::array();
  for (const TorqueViolation& t : r.violations) {
    nlohmann::ordered_json item;
    item["knot"] = t.knot;
    item["joint"] = t.joint;
    item["torque"] = t.torque;
    item["limit"] = t.limit;
    v.push_back(item);
  }
  doc["violations"] = v;
  return doc;
}

// ---------------------------------------------------------------------------
// Per-link forward-velocity table
// ---------------------------------------------------------------------------

/// CSV of the forward (target-direction) velocity of each listed link's
/// origin over time; useful for checking the proximal-to-distal speed
/// sequence of the kicking leg.
inline std::string link_velocity_csv(const RobotModel& model,
                                     const KinodynamicTrajectory& traj,
                                     const std::vector<int>& links,
                                     const Vec3& direction = Vec3(1, 0, 0)) {
  std::ostringstream out;
  out.precision(17);
  out << "t";
  for (int l : links) out << "," << model.links[l].name;
  out << "\n";
  for (int k = 0; k < traj.num_knots(); ++k) {
    out << traj.time(k);
    const FkResult fk = forward_kinematics(model, traj.q[k]);
    for (int l : links) {
      const MatX J = point_jacobian(model, fk, l, Vec3::Zero());
      out << "," << direction.dot(J * traj.v[k]);
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace kickplan
