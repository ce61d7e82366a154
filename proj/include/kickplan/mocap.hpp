#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kickplan/kinematics.hpp"
#include "kickplan/model.hpp"
#include "kickplan/types.hpp"

namespace kickplan {

struct MocapSkeleton {
  std::vector<std::string> joint_names;
  std::vector<int> parents;  // -1 for the root
  std::vector<Vec3> rest_offsets;

  int joint_index(const std::string& name) const {
    for (int i = 0; i < static_cast<int>(joint_names.size()); ++i)
      if (joint_names[i] == name) return i;
    return -1;
  }
};

/// Uniformly sampled skeleton frames of world joint positions.
struct MocapClip {
  double rate = 0.0;  // Hz
  MocapSkeleton skeleton;
  std::vector<std::vector<Vec3>> frames;  // [frame][joint]
  std::map<std::string, std::string> correspondence;  // mocap joint -> robot keypoint

  int num_frames() const { return static_cast<int>(frames.size()); }
  int num_joints() const { return static_cast<int>(skeleton.joint_names.size()); }
  double duration() const {
    return frames.empty() ? 0.0 : (num_frames() - 1) / rate;
  }
};

inline void validate_clip(const MocapClip& clip) {
  if (clip.rate <= 0.0) throw ValidationError("clip rate must be positive");
  for (const auto& f : clip.frames)
    if (static_cast<int>(f.size()) != clip.num_joints())
      throw ValidationError("all frames must have the same joint count");
  for (const auto& [mocap, robot] : clip.correspondence)
    if (clip.skeleton.joint_index(mocap) < 0)
      throw ValidationError("correspondence names unknown mocap joint '" +
                            mocap + "'");
}

/// Per-contact-point activity per knot plus the kick phase timings,
/// all in seconds from clip start.
struct ContactSchedule {
  std::vector<std::vector<bool>> active;  // [knot][contact point]
  double t_swing = 0.0;
  double t_lock = 0.0;
  double t_impact = 0.0;

  int num_knots() const { return static_cast<int>(active.size()); }
  bool is_active(int knot, int point) const { return active[knot][point]; }
};

// ---------------------------------------------------------------------------
// Clip transformations
// ---------------------------------------------------------------------------

/// Linear-interpolation resampling onto a uniform grid at target_rate.
/// Duration is preserved within one sample.
inline MocapClip resample(const MocapClip& clip, double target_rate) {
  if (target_rate <= 0.0) throw ValidationError("target rate must be positive");
  if (target_rate > clip.rate)
    throw ValidationError("target rate exceeds the clip rate");
  MocapClip out = clip;
  out.rate = target_rate;
  out.frames.clear();
  const int count =
      static_cast<int>(std::floor(clip.duration() * target_rate + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) {
    const double t = i / target_rate;
    const double s = std::min(t * clip.rate, double(clip.num_frames() - 1));
    const int k0 = std::min(static_cast<int>(s), clip.num_frames() - 1);
    const int k1 = std::min(k0 + 1, clip.num_frames() - 1);
    const double w = s - k0;
    std::vector<Vec3> frame(clip.num_joints());
    for (int j = 0; j < clip.num_joints(); ++j)
      frame[j] = (1.0 - w) * clip.frames[k0][j] + w * clip.frames[k1][j];
    out.frames.push_back(std::move(frame));
  }
  return out;
}

/// Vertical extent of the robot in its zero configuration, used as its
/// stand-in height for root-trajectory scaling.
inline double model_height(const RobotModel& model, const VecX& q_neutral) {
  FkResult fk = forward_kinematics(model, q_neutral);
  double lo = 1e30, hi = -1e30;
  for (int i = 0; i < model.num_links(); ++i) {
    lo = std::min(lo, fk.position[i].z());
    hi = std::max(hi, fk.position[i].z());
  }
  for (int c = 0; c < model.num_contacts(); ++c) {
    const double z = contact_position(model, fk, c).z();
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  for (int k = 0; k < static_cast<int>(model.keypoints.size()); ++k) {
    const double z = keypoint_position(model, fk, k).z();
    lo = std::min(lo, z);
    hi = std::max(hi, z);
  }
  return hi - lo;
}

inline double clip_height(const MocapClip& clip) {
  double lo = 1e30, hi = -1e30;
  for (const Vec3& p : clip.frames.front()) {
    lo = std::min(lo, p.z());
    hi = std::max(hi, p.z());
  }
  return hi - lo;
}

/// Recursively rescales every bone: per-frame bone directions are kept while
/// bone lengths are set to the robot's corresponding link lengths (measured
/// between the mapped keypoints in the zero configuration). Bones without a
/// mapped endpoint keep their length times the overall height ratio. The
/// root trajectory is scaled by robot height over human height.
inline MocapClip rescale_to_robot(const MocapClip& clip,
                                  const RobotModel& model) {
  VecX q0 = VecX::Zero(model.nq());
  q0[3] = 1.0;
  FkResult fk = forward_kinematics(model, q0);

  const double human_h = clip_height(clip);
  const double robot_h = model_height(model, q0);
  const double ratio = human_h > 1e-9 ? robot_h / human_h : 1.0;

  auto robot_keypoint = [&](int mocap_joint) -> int {
    auto it = clip.correspondence.find(clip.skeleton.joint_names[mocap_joint]);
    if (it == clip.correspondence.end()) return -1;
    const int k = model.keypoint_index(it->second);
    if (k < 0)
      throw ValidationError("correspondence targets unknown robot keypoint '" +
                            it->second + "'");
    return k;
  };

  // Per-bone target lengths, fixed across frames.
  const int nj = clip.num_joints();
  std::vector<double> target_len(nj, -1.0);
  for (int j = 0; j < nj; ++j) {
    const int p = clip.skeleton.parents[j];
    if (p < 0) continue;
    const int kj = robot_keypoint(j), kp = robot_keypoint(p);
    if (kj >= 0 && kp >= 0)
      target_len[j] = (keypoint_position(model, fk, kj) -
                       keypoint_position(model, fk, kp)).norm();
  }

  // Children after parents.
  std::vector<int> order;
  {
    std::vector<char> placed(nj, 0);
    while (static_cast<int>(order.size()) < nj)
      for (int j = 0; j < nj; ++j)
        if (!placed[j] &&
            (clip.skeleton.parents[j] < 0 || placed[clip.skeleton.parents[j]])) {
          order.push_back(j);
          placed[j] = 1;
        }
  }

  MocapClip out = clip;
  for (int f = 0; f < clip.num_frames(); ++f) {
    const auto& src = clip.frames[f];
    auto& dst = out.frames[f];
    for (int j : order) {
      const int p = clip.skeleton.parents[j];
      if (p < 0) {
        dst[j] = ratio * src[j];
        continue;
      }
      const Vec3 bone = src[j] - src[p];
      const double len = bone.norm();
      const double target = target_len[j] >= 0.0 ? target_len[j] : ratio * len;
      dst[j] = len > 1e-12 ? Vec3(dst[p] + (target / len) * bone)
                           : Vec3(dst[p]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Contact detection
// ---------------------------------------------------------------------------

struct ContactDetectParams {
  std::string left_foot;        // mocap joint names
  std::string right_foot;
  bool kick_with_right = true;
  double height_threshold = 0.02;  // m above the estimated ground plane
  double speed_threshold = 0.05;   // m/s
  int debounce_frames = 3;
  double lock_lead = 0.1;          // s before impact
  double ground_percentile = 0.05;
  std::string left_link_prefix = "l_";   // model links carrying left-foot contacts
  std::string right_link_prefix = "r_";
};

namespace detail {

inline std::vector<Vec3> joint_velocities(const MocapClip& clip, int joint) {
  const int n = clip.num_frames();
  std::vector<Vec3> v(n);
  for (int k = 0; k < n; ++k) {
    const int a = std::max(0, k - 1), b = std::min(n - 1, k + 1);
    v[k] = (clip.frames[b][joint] - clip.frames[a][joint]) * clip.rate /
           double(b - a);
  }
  return v;
}

inline void debounce(std::vector<bool>& flags, int window) {
  if (window <= 1) return;
  int start = 0;
  while (start < static_cast<int>(flags.size())) {
    int end = start;
    while (end < static_cast<int>(flags.size()) && flags[end] == flags[start])
      ++end;
    const bool interior = start > 0 && end < static_cast<int>(flags.size());
    if (interior && end - start < window)
      std::fill(flags.begin() + start, flags.begin() + end, !flags[start]);
    start = end;
  }
}

}  // namespace detail

/// Height/speed-threshold foot contact detection plus kick phase timings:
/// T_impact at peak kicking-foot forward speed, T_swing at the last lift-off
/// before it, T_lock a configurable lead before impact.
inline ContactSchedule detect_contacts(const MocapClip& clip,
                                       const RobotModel& model,
                                       const ContactDetectParams& params) {
  if (params.height_threshold <= 0.0 || params.speed_threshold <= 0.0)
    throw ValidationError("contact thresholds must be positive");
  const int lf = clip.skeleton.joint_index(params.left_foot);
  const int rf = clip.skeleton.joint_index(params.right_foot);
  if (lf < 0 || rf < 0)
    throw ValidationError("foot joints not found in the clip skeleton");
  const int n = clip.num_frames();
  if (n < 3) throw ValidationError("clip too short for contact detection");

  // Ground plane from a low percentile of foot heights, robust to noise.
  std::vector<double> heights;
  heights.reserve(2 * n);
  for (int k = 0; k < n; ++k) {
    heights.push_back(clip.frames[k][lf].z());
    heights.push_back(clip.frames[k][rf].z());
  }
  std::sort(heights.begin(), heights.end());
  const double ground =
      heights[static_cast<size_t>(params.ground_percentile * (heights.size() - 1))];

  auto foot_contacts = [&](int joint) {
    const auto vel = detail::joint_velocities(clip, joint);
    std::vector<bool> c(n);
    for (int k = 0; k < n; ++k)
      c[k] = clip.frames[k][joint].z() - ground < params.height_threshold &&
             vel[k].norm() < params.speed_threshold;
    detail::debounce(c, params.debounce_frames);
    return c;
  };
  const std::vector<bool> left = foot_contacts(lf);
  const std::vector<bool> right = foot_contacts(rf);

  bool any = false;
  for (int k = 0; k < n; ++k) any = any || left[k] || right[k];
  if (!any) throw ValidationError("no contact frames found in the clip");

  const int kick = params.kick_with_right ? rf : lf;
  const std::vector<bool>& kick_contact = params.kick_with_right ? right : left;
  const auto kick_vel = detail::joint_velocities(clip, kick);
  int impact_frame = 0;
  for (int k = 1; k < n; ++k)
    if (kick_vel[k].x() > kick_vel[impact_frame].x()) impact_frame = k;

  int swing_frame = -1;
  for (int k = 1; k <= impact_frame; ++k)
    if (kick_contact[k - 1] && !kick_contact[k]) swing_frame = k;
  if (swing_frame < 0)
    throw ValidationError("clip contains no kicking-foot lift-off before impact");

  ContactSchedule sched;
  sched.t_swing = swing_frame / clip.rate;
  sched.t_impact = impact_frame / clip.rate;
  sched.t_lock = sched.t_impact - params.lock_lead;
  if (sched.t_lock <= sched.t_swing)
    sched.t_lock = 0.5 * (sched.t_swing + sched.t_impact);
  if (sched.t_impact <= sched.t_swing)
    throw ValidationError("clip too short to contain a swing phase");

  sched.active.assign(n, std::vector<bool>(model.num_contacts(), false));
  for (int c = 0; c < model.num_contacts(); ++c) {
    const std::string& link_name = model.links[model.contact_points[c].link].name;
    const bool is_left =
        link_name.rfind(params.left_link_prefix, 0) == 0;
    const bool is_right =
        link_name.rfind(params.right_link_prefix, 0) == 0;
    if (!is_left && !is_right)
      throw ValidationError("contact link '" + link_name +
                            "' matches neither foot prefix");
    for (int k = 0; k < n; ++k)
      sched.active[k][c] = is_left ? left[k] : right[k];
  }
  return sched;
}

// ---------------------------------------------------------------------------
// Clip file IO: CSV of (frame, joint, x, y, z) plus a JSON skeleton sidecar.
// ---------------------------------------------------------------------------

inline MocapClip load_clip_sidecar(const nlohmann::json& doc) {
  MocapClip clip;
  clip.rate = doc.at("rate").get<double>();
  for (const auto& jj : doc.at("joints")) {
    clip.skeleton.joint_names.push_back(jj.at("name").get<std::string>());
    clip.skeleton.parents.push_back(jj.at("parent").get<int>());
    clip.skeleton.rest_offsets.push_back(
        jj.contains("rest_offset") ? detail::read_vec3(jj.at("rest_offset"), "rest_offset")
                                   : Vec3::Zero());
  }
  const nlohmann::json corr =
      doc.value("correspondence", nlohmann::json::object());
  for (const auto& [k, v] : corr.items())
    clip.correspondence[k] = v.get<std::string>();
  return clip;
}

inline nlohmann::json clip_sidecar_json(const MocapClip& clip) {
  nlohmann::json doc;
  doc["rate"] = clip.rate;
  doc["joints"] = nlohmann::json::array();
  for (int j = 0; j < clip.num_joints(); ++j)
    doc["joints"].push_back({{"name", clip.skeleton.joint_names[j]},
                             {"parent", clip.skeleton.parents[j]},
                             {"rest_offset",
                              detail::vec3_json(clip.skeleton.rest_offsets[j])}});
  doc["correspondence"] = nlohmann::json::object();
  for (const auto& [k, v] : clip.correspondence) doc["correspondence"][k] = v;
  return doc;
}

/// Parses "frame,joint,x,y,z" rows into the clip described by the sidecar.
inline void parse_clip_csv(MocapClip& clip, std::istream& in) {
  std::string line;
  int max_frame = -1;
  std::vector<std::tuple<int, int, Vec3>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ParseError("clip row needs 5 columns: " + line);
    if (cells[0] == "frame") continue;  // header
    const int frame = std::stoi(cells[0]);
    const int joint = clip.skeleton.joint_index(cells[1]);
    if (joint < 0) throw ParseError("clip row names unknown joint '" + cells[1] + "'");
    rows.emplace_back(frame, joint,
                      Vec3(std::stod(cells[2]), std::stod(cells[3]),
                           std::stod(cells[4])));
    max_frame = std::max(max_frame, frame);
  }
  if (max_frame < 0) throw ParseError("clip CSV contains no data rows");
  clip.frames.assign(max_frame + 1,
                     std::vector<Vec3>(clip.num_joints(), Vec3::Zero()));
  for (const auto& [f, j, p] : rows) clip.frames[f][j] = p;
  validate_clip(clip);
}

inline void write_clip_csv(const MocapClip& clip, std::ostream& out) {
  out << "frame,joint,x,y,z\n";
  out.precision(17);
  for (int f = 0; f < clip.num_frames(); ++f)
    for (int j = 0; j < clip.num_joints(); ++j) {
      const Vec3& p = clip.frames[f][j];
      out << f << ',' << clip.skeleton.joint_names[j] << ',' << p.x() << ','
          << p.y() << ',' << p.z() << '\n';
    }
}

/// Per-knot reference keypoint targets for cost evaluation: pairs of
/// (robot keypoint index, world position).
inline std::vector<std::vector<std::pair<int, Vec3>>> reference_targets(
    const MocapClip& clip, const RobotModel& model) {
  std::vector<std::pair<int, int>> map;  // (mocap joint, robot keypoint)
  for (const auto& [mocap, robot] : clip.correspondence) {
    const int j = clip.skeleton.joint_index(mocap);
    const int k = model.keypoint_index(robot);
    if (j >= 0 && k >= 0) map.emplace_back(j, k);
  }
  std::sort(map.begin(), map.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<std::vector<std::pair<int, Vec3>>> out(clip.num_frames());
  for (int f = 0; f < clip.num_frames(); ++f)
    for (const auto& [j, k] : map) out[f].emplace_back(k, clip.frames[f][j]);
  return out;
}

inline nlohmann::json schedule_json(const ContactSchedule& sched, double dt) {
  nlohmann::json doc;
  doc["t_swing"] = sched.t_swing;
  doc["t_lock"] = sched.t_lock;
  doc["t_impact"] = sched.t_impact;
  doc["knots"] = nlohmann::json::array();
  for (int k = 0; k < sched.num_knots(); ++k) {
    nlohmann::json row;
    row["t"] = k * dt;
    row["active"] = nlohmann::json::array();
    for (bool a : sched.active[k]) row["active"].push_back(a ? 1 : 0);
    doc["knots"].push_back(std::move(row));
  }
  return doc;
}

}  // namespace kickplan
