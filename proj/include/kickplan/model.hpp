#pragma once

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kickplan/types.hpp"

namespace kickplan {

/// Capsule collision geometry, expressed in the link frame.
struct Capsule {
  Vec3 endpoint_a = Vec3::Zero();
  Vec3 endpoint_b = Vec3::Zero();
  double radius = 0.0;
};

struct Link {
  std::string name;
  double mass = 0.0;               // kg
  Vec3 com_offset = Vec3::Zero();  // link frame, m
  Mat3 inertia = Mat3::Zero();     // about the link CoM, kg m^2
  std::optional<Capsule> capsule;
};

enum class JointKind { kFloatingBase, kRevolute };

struct Joint {
  std::string name;
  JointKind kind = JointKind::kRevolute;
  int parent = -1;             // index of the parent joint/link, -1 for the root
  Vec3 origin = Vec3::Zero();  // joint frame position in the parent link frame
  Vec3 axis = Vec3::UnitZ();   // revolute only, link frame
  double q_min = 0, q_max = 0;
  double v_min = 0, v_max = 0;
  double tau_min = 0, tau_max = 0;
};

struct ContactPoint {
  int link = -1;
  Vec3 offset = Vec3::Zero();  // link frame
};

struct Keypoint {
  std::string name;
  int link = -1;
  Vec3 offset = Vec3::Zero();
};

/// Kinematic tree description. Link i is attached to its parent by joint i;
/// joint 0 is the floating base. Immutable after load.
struct RobotModel {
  std::vector<Link> links;
  std::vector<Joint> joints;
  std::vector<ContactPoint> contact_points;
  std::vector<Keypoint> keypoints;
  std::vector<std::pair<int, int>> collision_pairs;
  double total_mass = 0.0;

  // Traversal order with parents before children, computed on load.
  std::vector<int> order;

  int num_links() const { return static_cast<int>(links.size()); }
  int num_actuated() const { return static_cast<int>(joints.size()) - 1; }
  int nq() const { return num_actuated() + 7; }
  int nv() const { return num_actuated() + 6; }
  int num_contacts() const { return static_cast<int>(contact_points.size()); }

  /// Position index of actuated joint j (j >= 1) in the configuration vector.
  static int q_index(int joint) { return 7 + joint - 1; }
  /// Velocity index of actuated joint j (j >= 1) in the velocity vector.
  static int v_index(int joint) { return 6 + joint - 1; }

  int keypoint_index(const std::string& name) const {
    for (int i = 0; i < static_cast<int>(keypoints.size()); ++i)
      if (keypoints[i].name == name) return i;
    return -1;
  }

  int link_index(const std::string& name) const {
    for (int i = 0; i < num_links(); ++i)
      if (links[i].name == name) return i;
    return -1;
  }
};

namespace detail {

inline Vec3 read_vec3(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError("field '" + field + "' must be a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Mat3 read_inertia(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 6)
    throw ParseError("field '" + field +
                     "' must be the 6-element inertia upper triangle");
  Mat3 m;
  const double ixx = j[0], ixy = j[1], ixz = j[2], iyy = j[3], iyz = j[4],
               izz = j[5];
  m << ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz;
  return m;
}

inline nlohmann::json vec3_json(const Vec3& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

}  // namespace detail

inline void validate_model(const RobotModel& m) {
  const int nl = m.num_links();
  if (nl == 0) throw ValidationError("model has no links");
  if (m.joints.size() != m.links.size())
    throw ValidationError("links and joints must pair up one-to-one");
  if (m.joints[0].kind != JointKind::kFloatingBase || m.joints[0].parent != -1)
    throw ValidationError("joint 0 must be the floating base with parent -1");

  for (int i = 1; i < nl; ++i) {
    const Joint& j = m.joints[i];
    if (j.kind != JointKind::kRevolute)
      throw ValidationError("joint " + std::to_string(i) +
                            ": only one floating base is allowed");
    if (j.parent < 0 || j.parent >= nl || j.parent == i)
      throw ValidationError("joint " + std::to_string(i) +
                            ": parent index out of range");
    if (std::abs(j.axis.norm() - 1.0) > 1e-12)
      throw ValidationError("joint " + std::to_string(i) +
                            ": axis must have unit norm");
    if (j.q_min > j.q_max || j.v_min > j.v_max || j.tau_min > j.tau_max)
      throw ValidationError("joint " + std::to_string(i) +
                            ": limit bounds out of order");
  }

  // Rooted-tree check: walking up from any joint must reach the base.
  for (int i = 1; i < nl; ++i) {
    int cur = i, steps = 0;
    while (cur != 0) {
      cur = m.joints[cur].parent;
      if (cur < 0 || ++steps > nl)
        throw ValidationError("joint parents contain a cycle at joint " +
                              std::to_string(i));
    }
  }

  double mass_sum = 0.0;
  for (int i = 0; i < nl; ++i) {
    const Link& l = m.links[i];
    mass_sum += l.mass;
    if ((l.inertia - l.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ValidationError("link " + std::to_string(i) +
                            ": inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(l.inertia);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw ValidationError("link " + std::to_string(i) +
                            ": inertia must be positive semidefinite");
    if (l.capsule && l.capsule->radius <= 0.0)
      throw ValidationError("link " + std::to_string(i) +
                            ": capsule radius must be positive");
  }
  if (std::abs(m.total_mass - mass_sum) >
      1e-9 * std::max(1.0, std::abs(mass_sum)))
    throw ValidationError("total_mass does not match the sum of link masses");

  for (const ContactPoint& c : m.contact_points)
    if (c.link < 0 || c.link >= nl)
      throw ValidationError("contact point references a missing link");
  for (const Keypoint& k : m.keypoints)
    if (k.link < 0 || k.link >= nl)
      throw ValidationError("keypoint '" + k.name +
                            "' references a missing link");
  for (const auto& [a, b] : m.collision_pairs) {
    if (a < 0 || a >= nl || b < 0 || b >= nl || a == b)
      throw ValidationError("collision pair must reference two distinct links");
    if (!m.links[a].capsule || !m.links[b].capsule)
      throw ValidationError("collision pair links must both carry capsules");
  }
}

inline RobotModel load_model(const nlohmann::json& doc) {
  RobotModel m;
  if (!doc.contains("links") || !doc.contains("joints"))
    throw ParseError("model document requires 'links' and 'joints'");

  for (const auto& jl : doc.at("links")) {
    Link l;
    l.name = jl.value("name", "");
    if (!jl.contains("mass")) throw ParseError("link missing field 'mass'");
    l.mass = jl.at("mass").get<double>();
    l.com_offset = detail::read_vec3(jl.value("com_offset", nlohmann::json::array({0, 0, 0})), "com_offset");
    if (jl.contains("inertia"))
      l.inertia = detail::read_inertia(jl.at("inertia"), "inertia");
    if (jl.contains("capsule")) {
      const auto& jc = jl.at("capsule");
      Capsule c;
      c.endpoint_a = detail::read_vec3(jc.at("a"), "capsule.a");
      c.endpoint_b = detail::read_vec3(jc.at("b"), "capsule.b");
      c.radius = jc.at("radius").get<double>();
      l.capsule = c;
    }
    m.links.push_back(std::move(l));
  }

  for (const auto& jj : doc.at("joints")) {
    Joint j;
    j.name = jj.value("name", "");
    const std::string kind = jj.value("kind", "revolute");
    if (kind == "floating_base")
      j.kind = JointKind::kFloatingBase;
    else if (kind == "revolute")
      j.kind = JointKind::kRevolute;
    else
      throw ParseError("joint '" + j.name + "': unknown kind '" + kind + "'");
    j.parent = jj.value("parent", -1);
    j.origin = detail::read_vec3(jj.value("origin", nlohmann::json::array({0, 0, 0})), "origin");
    if (jj.contains("axis")) j.axis = detail::read_vec3(jj.at("axis"), "axis");
    j.q_min = jj.value("q_min", 0.0);
    j.q_max = jj.value("q_max", 0.0);
    j.v_min = jj.value("v_min", 0.0);
    j.v_max = jj.value("v_max", 0.0);
    j.tau_min = jj.value("tau_min", 0.0);
    j.tau_max = jj.value("tau_max", 0.0);
    m.joints.push_back(std::move(j));
  }

  for (const auto& jc : doc.value("contact_points", nlohmann::json::array())) {
    ContactPoint c;
    c.link = jc.at("link").get<int>();
    c.offset = detail::read_vec3(jc.at("offset"), "contact offset");
    m.contact_points.push_back(c);
  }
  for (const auto& jk : doc.value("keypoints", nlohmann::json::array())) {
    Keypoint k;
    k.name = jk.at("name").get<std::string>();
    k.link = jk.at("link").get<int>();
    k.offset = detail::read_vec3(jk.at("offset"), "keypoint offset");
    m.keypoints.push_back(std::move(k));
  }
  for (const auto& jp : doc.value("collision_pairs", nlohmann::json::array())) {
    if (!jp.is_array() || jp.size() != 2)
      throw ParseError("collision pair must be a 2-element array");
    m.collision_pairs.emplace_back(jp[0].get<int>(), jp[1].get<int>());
  }

  double mass_sum = 0.0;
  for (const Link& l : m.links) mass_sum += l.mass;
  m.total_mass = doc.value("total_mass", mass_sum);

  validate_model(m);

  // Topological traversal order (parents first); valid since the tree check passed.
  m.order.clear();
  std::vector<char> placed(m.links.size(), 0);
  while (m.order.size() < m.links.size()) {
    for (int i = 0; i < m.num_links(); ++i) {
      if (placed[i]) continue;
      const int p = m.joints[i].parent;
      if (p < 0 || placed[p]) {
        m.order.push_back(i);
        placed[i] = 1;
      }
    }
  }
  return m;
}

inline nlohmann::json serialize_model(const RobotModel& m) {
  nlohmann::json doc;
  doc["links"] = nlohmann::json::array();
  for (const Link& l : m.links) {
    nlohmann::json jl;
    jl["name"] = l.name;
    jl["mass"] = l.mass;
    jl["com_offset"] = detail::vec3_json(l.com_offset);
    const Mat3& I = l.inertia;
    jl["inertia"] = {I(0, 0), I(0, 1), I(0, 2), I(1, 1), I(1, 2), I(2, 2)};
    if (l.capsule)
      jl["capsule"] = {{"a", detail::vec3_json(l.capsule->endpoint_a)},
                       {"b", detail::vec3_json(l.capsule->endpoint_b)},
                       {"radius", l.capsule->radius}};
    doc["links"].push_back(std::move(jl));
  }
  doc["joints"] = nlohmann::json::array();
  for (const Joint& j : m.joints) {
    nlohmann::json jj;
    jj["name"] = j.name;
    jj["kind"] =
        j.kind == JointKind::kFloatingBase ? "floating_base" : "revolute";
    jj["parent"] = j.parent;
    jj["origin"] = detail::vec3_json(j.origin);
    jj["axis"] = detail::vec3_json(j.axis);
    jj["q_min"] = j.q_min;
    jj["q_max"] = j.q_max;
    jj["v_min"] = j.v_min;
    jj["v_max"] = j.v_max;
    jj["tau_min"] = j.tau_min;
    jj["tau_max"] = j.tau_max;
    doc["joints"].push_back(std::move(jj));
  }
  doc["contact_points"] = nlohmann::json::array();
  for (const ContactPoint& c : m.contact_points)
    doc["contact_points"].push_back(
        {{"link", c.link}, {"offset", detail::vec3_json(c.offset)}});
  doc["keypoints"] = nlohmann::json::array();
  for (const Keypoint& k : m.keypoints)
    doc["keypoints"].push_back({{"name", k.name},
                                {"link", k.link},
                                {"offset", detail::vec3_json(k.offset)}});
  doc["collision_pairs"] = nlohmann::json::array();
  for (const auto& [a, b] : m.collision_pairs)
    doc["collision_pairs"].push_back({a, b});
  doc["total_mass"] = m.total_mass;
  return doc;
}

}  // namespace kickplan
