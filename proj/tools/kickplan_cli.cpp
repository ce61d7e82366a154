// Command-line front end: retargets a mocap clip onto a robot model and
// writes the optimized trajectory plus reports, or inspects schedules and
// rewards. Exit codes: 0 success, 1 error, 2 flagged infeasible.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kickplan/imitation.hpp"
#include "kickplan/io.hpp"
#include "kickplan/mocap.hpp"
#include "kickplan/model.hpp"
#include "kickplan/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace kickplan;

constexpr const char* kEnvPrefix = "KICKPLAN";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Every config key can be overridden by an environment variable named
/// PREFIX_SECTION_KEY (upper-cased); values are parsed as JSON when possible,
/// otherwise taken as strings.
void apply_env_overrides(json& node, const std::string& prefix) {
  if (!node.is_object()) return;
  for (auto& [key, value] : node.items()) {
    std::string name = prefix + "_" + key;
    for (char& c : name) c = std::toupper(static_cast<unsigned char>(c));
    if (value.is_object()) {
      apply_env_overrides(value, name);
      continue;
    }
    if (const char* env = std::getenv(name.c_str())) {
      json parsed = json::parse(env, nullptr, false);
      value = parsed.is_discarded() ? json(std::string(env)) : parsed;
    }
  }
}

json default_config() {
  json cfg;
  cfg["rate"] = 30.0;
  cfg["friction"] = 0.7;
  cfg["ball_position"] = {0.30, -0.08, 0.11};
  cfg["target_direction"] = {1.0, 0.0, 0.0};
  cfg["kick_speed"] = 2.0;
  cfg["kick_foot_link"] = "r_toe";
  cfg["support_foot_link"] = "l_foot";
  cfg["locked_joints"] = {"r_ankle_pitch", "r_ankle_roll", "r_toe"};
  cfg["detect"] = {{"left_foot", "l_foot"},
                   {"right_foot", "r_foot"},
                   {"kick_with_right", true},
                   {"height_threshold", 0.02},
                   {"speed_threshold", 0.05},
                   {"lock_lead", 0.1}};
  cfg["weights"] = {{"reference", 10.0}, {"impulse", 1.0},
                    {"velocity", 1e-2},  {"momentum", 1e-2},
                    {"acceleration", 0.1}, {"force", 1e-6},
                    {"force_smooth", 1e-3}};
  cfg["solver"] = {{"max_outer", 40},       {"max_inner", 800},
                   {"eq_tol", 1e-4},        {"ineq_tol", 1e-6},
                   {"stationarity_tol", 1e-4}, {"penalty_init", 10.0},
                   {"penalty_growth", 10.0},   {"penalty_max", 1e6}};
  cfg["ret"] = {{"d_max", 0.30},  {"d_min", 0.10}, {"t_start", 2e8},
                {"t_end", 8e8},   {"stairs", 2},   {"gamma", 20.0},
                {"samples", 101}};
  cfg["rewards"] = {{"w_keypoint", 0.25}, {"w_joint", 0.25},
                    {"w_joint_vel", 0.1}, {"w_com", 0.25},
                    {"w_ball", 1.0}};
  return cfg;
}

json load_config(const std::string& path) {
  json cfg = default_config();
  if (!path.empty()) {
    const json user = json::parse(read_text_file(path));
    cfg.merge_patch(user);
  }
  apply_env_overrides(cfg, kEnvPrefix);
  return cfg;
}

RobotModel load_model_file(const std::string& path) {
  return load_model(json::parse(read_text_file(path)));
}

/// A clip is a CSV of world joint positions plus a JSON sidecar (same stem,
/// `.json` extension) naming the skeleton and correspondences.
MocapClip load_clip_files(const std::string& csv_path) {
  std::filesystem::path sidecar(csv_path);
  sidecar.replace_extension(".json");
  MocapClip clip =
      load_clip_sidecar(json::parse(read_text_file(sidecar.string())));
  std::istringstream csv(read_text_file(csv_path));
  parse_clip_csv(clip, csv);
  return clip;
}

SolverOptions solver_options(const json& cfg) {
  const json& s = cfg.at("solver");
  SolverOptions opts;
  opts.max_outer = s.at("max_outer").get<int>();
  opts.max_inner = s.at("max_inner").get<int>();
  opts.eq_tol = s.at("eq_tol").get<double>();
  opts.ineq_tol = s.at("ineq_tol").get<double>();
  opts.stationarity_tol = s.at("stationarity_tol").get<double>();
  opts.penalty_init = s.at("penalty_init").get<double>();
  opts.penalty_growth = s.at("penalty_growth").get<double>();
  opts.penalty_max = s.at("penalty_max").get<double>();
  return opts;
}

ContactDetectParams detect_params(const json& cfg) {
  const json& d = cfg.at("detect");
  ContactDetectParams p;
  p.left_foot = d.at("left_foot").get<std::string>();
  p.right_foot = d.at("right_foot").get<std::string>();
  p.kick_with_right = d.at("kick_with_right").get<bool>();
  p.height_threshold = d.at("height_threshold").get<double>();
  p.speed_threshold = d.at("speed_threshold").get<double>();
  p.lock_lead = d.at("lock_lead").get<double>();
  return p;
}

RetSchedule ret_schedule(const json& cfg) {
  const json& r = cfg.at("ret");
  RetSchedule s;
  s.d_max = r.at("d_max").get<double>();
  s.d_min = r.at("d_min").get<double>();
  s.t_start = r.at("t_start").get<double>();
  s.t_end = r.at("t_end").get<double>();
  s.stairs = r.at("stairs").get<int>();
  s.gamma = r.at("gamma").get<double>();
  return s;
}

Vec3 vec3_cfg(const json& a) {
  return Vec3(a.at(0).get<double>(), a.at(1).get<double>(),
              a.at(2).get<double>());
}

ProblemSpec make_spec(const RobotModel& model, const MocapClip& raw_clip,
                      const json& cfg) {
  const double rate = cfg.at("rate").get<double>();
  MocapClip clip = rescale_to_robot(resample(raw_clip, rate), model);

  ProblemSpec spec;
  spec.model = model;
  spec.targets = reference_targets(clip, spec.model);
  spec.schedule = detect_contacts(clip, spec.model, detect_params(cfg));
  spec.dt = 1.0 / rate;
  spec.friction = cfg.at("friction").get<double>();
  spec.ball_position = vec3_cfg(cfg.at("ball_position"));
  spec.target_direction = vec3_cfg(cfg.at("target_direction"));
  spec.kick_speed = cfg.at("kick_speed").get<double>();
  spec.kick_foot_link =
      spec.model.link_index(cfg.at("kick_foot_link").get<std::string>());
  spec.support_foot_link =
      spec.model.link_index(cfg.at("support_foot_link").get<std::string>());
  if (spec.kick_foot_link < 0 || spec.support_foot_link < 0)
    throw ValidationError("configured foot links not found in the model");
  for (const auto& jn : cfg.at("locked_joints")) {
    const std::string name = jn.get<std::string>();
    bool found = false;
    for (size_t j = 1; j < spec.model.joints.size(); ++j)
      if (spec.model.joints[j].name == name) {
        spec.locked_joints.push_back(static_cast<int>(j));
        found = true;
      }
    if (!found)
      throw ValidationError("locked joint '" + name + "' not in the model");
  }
  const json& w = cfg.at("weights");
  spec.weights.reference = w.at("reference").get<double>();
  spec.weights.impulse = w.at("impulse").get<double>();
  spec.weights.velocity = w.at("velocity").get<double>();
  spec.weights.momentum = w.at("momentum").get<double>();
  spec.weights.acceleration = w.at("acceleration").get<double>();
  spec.weights.force = w.at("force").get<double>();
  spec.weights.force_smooth = w.at("force_smooth").get<double>();
  return spec;
}

/// Kinematic chain from the kick foot up to the root, root first.
std::vector<int> kick_chain(const RobotModel& model, int foot_link) {
  std::vector<int> chain;
  for (int l = foot_link; l >= 0; l = model.joints[l].parent)
    chain.insert(chain.begin(), l);
  return chain;
}

// ---------------------------------------------------------------------------
// retarget
// ---------------------------------------------------------------------------

int cmd_retarget(const std::string& model_path, const std::string& clip_path,
                 const std::string& config_path, const std::string& out_dir,
                 unsigned seed, const std::string& stage, int max_rounds) {
  if (max_rounds < 1)
    throw ValidationError("--max-rounds must be at least 1");
  const json cfg = load_config(config_path);
  const RobotModel model = load_model_file(model_path);
  const MocapClip clip = load_clip_files(clip_path);
  const ProblemSpec spec = make_spec(model, clip, cfg);
  const SolverOptions opts = solver_options(cfg);

  std::filesystem::create_directories(out_dir);
  const std::string mhash = model_hash(model);
  json stamp = cfg;
  stamp["seed"] = seed;
  stamp["stage"] = stage;
  stamp["max_rounds"] = max_rounds;
  const std::string chash = hash_hex(stamp.dump());

  KinodynamicTrajectory traj;
  nlohmann::ordered_json reports;
  reports["version"] = kToolVersion;
  reports["model_hash"] = mhash;
  reports["config_hash"] = chash;
  bool feasible = false;

  if (stage == "kin") {
    const RetargetResult res = two_stage_retarget(spec, opts, opts, false);
    traj = res.trajectory;
    reports["kinematic"] = report_to_json(res.kinematic_report);
    feasible = res.kinematic_report.converged;
  } else {
    FeasibilityResult out;
    if (stage == "full") {
      out.retarget = two_stage_retarget(spec, opts, opts);
      out.torques = verify_torques(model, out.retarget.trajectory);
      out.feasible = out.torques.feasible &&
                     out.retarget.full_report.converged;
      out.rounds = 1;
      out.proxy_scales = {spec.torque_proxy_scale};
    } else if (stage == "all") {
      out = retarget_until_feasible(spec, opts, opts, max_rounds);
    } else {
      throw ValidationError("unknown stage '" + stage + "'");
    }
    traj = out.retarget.trajectory;
    reports["kinematic"] = report_to_json(out.retarget.kinematic_report);
    reports["full"] = report_to_json(out.retarget.full_report);
    reports["torques"] = torque_report_to_json(out.torques);
    reports["rounds"] = out.rounds;
    reports["proxy_scales"] = out.proxy_scales;
    feasible = out.feasible && out.retarget.full_report.converged;
  }
  reports["feasible"] = feasible;

  const auto path = [&](const char* f) {
    return (std::filesystem::path(out_dir) / f).string();
  };
  write_text_file(path("trajectory.json"),
                  trajectory_to_json(traj, spec.schedule, mhash, chash).dump(2) +
                      "\n");
  write_text_file(path("reports.json"), reports.dump(2) + "\n");
  write_text_file(path("schedule.json"),
                  schedule_json(spec.schedule, spec.dt).dump(2) + "\n");
  write_text_file(path("link_velocities.csv"),
                  link_velocity_csv(model, traj,
                                    kick_chain(model, spec.kick_foot_link),
                                    spec.target_direction));
  std::cout << (feasible ? "feasible" : "infeasible") << "; outputs in "
            << out_dir << "\n";
  return feasible ? 0 : 2;
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

int cmd_inspect_contacts(const std::string& model_path,
                         const std::string& clip_path,
                         const std::string& config_path) {
  const json cfg = load_config(config_path);
  const RobotModel model = load_model_file(model_path);
  const double rate = cfg.at("rate").get<double>();
  MocapClip clip =
      rescale_to_robot(resample(load_clip_files(clip_path), rate), model);
  const ContactSchedule sched =
      detect_contacts(clip, model, detect_params(cfg));
  std::cout << schedule_json(sched, 1.0 / rate).dump(2) << "\n";
  return 0;
}

int cmd_inspect_ret(const std::string& config_path) {
  const json cfg = load_config(config_path);
  const RetSchedule s = ret_schedule(cfg);
  const int samples = cfg.at("ret").at("samples").get<int>();
  if (samples < 2) throw ValidationError("ret.samples must be at least 2");
  std::cout << "t,threshold\n";
  std::cout.precision(17);
  for (int i = 0; i < samples; ++i) {
    const double t = s.t_end * i / (samples - 1);
    std::cout << t << "," << ret_threshold(t, s) << "\n";
  }
  return 0;
}

int cmd_inspect_rewards(const std::string& model_path,
                        const std::string& input_path,
                        const std::string& config_path) {
  const json cfg = load_config(config_path);
  const RobotModel model = load_model_file(model_path);
  const json in = json::parse(read_text_file(input_path));
  const auto vec = [](const json& a) {
    VecX v(a.size());
    for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
    return v;
  };
  RobotState state{vec(in.at("q")), vec(in.at("v"))};
  RobotState ref{vec(in.at("q_ref")), vec(in.at("v_ref"))};

  RewardWeights w;
  const json& rw = cfg.at("rewards");
  w.w_keypoint = rw.at("w_keypoint").get<double>();
  w.w_joint = rw.at("w_joint").get<double>();
  w.w_joint_vel = rw.at("w_joint_vel").get<double>();
  w.w_com = rw.at("w_com").get<double>();
  w.w_ball = rw.at("w_ball").get<double>();

  const RewardComponents r = reward_imitation(state, ref, model, w);
  nlohmann::ordered_json out;
  out["keypoint"] = r.keypoint;
  out["joint"] = r.joint;
  out["com"] = r.com;
  out["total"] = r.total();
  if (in.contains("v_ball"))
    out["ball"] = reward_ball(vec3_cfg(in.at("v_ball")),
                              vec3_cfg(in.value("n_target",
                                                json::array({1.0, 0.0, 0.0}))),
                              w.w_ball);
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mocap-to-robot kick trajectory retargeting"};
  app.require_subcommand(1);

  std::string model_path, clip_path, config_path, out_dir = "out";
  std::string stage = "all", input_path;
  unsigned seed = 0;
  int max_rounds = 5;

  CLI::App* retarget =
      app.add_subcommand("retarget", "optimize a kick trajectory from a clip");
  retarget->add_option("--model", model_path, "robot model JSON")->required();
  retarget->add_option("--clip", clip_path, "mocap clip CSV (JSON sidecar)")
      ->required();
  retarget->add_option("--config", config_path, "run configuration JSON");
  retarget->add_option("--out", out_dir, "output directory");
  retarget->add_option("--seed", seed, "RNG seed recorded in outputs");
  retarget->add_option("--stage", stage, "kin | full | all")
      ->check(CLI::IsMember({"kin", "full", "all"}));
  retarget->add_option("--max-rounds", max_rounds,
                       "verification re-solve budget");

  CLI::App* inspect = app.add_subcommand("inspect", "print derived data");
  inspect->require_subcommand(1);
  CLI::App* contacts =
      inspect->add_subcommand("contacts", "contact schedule for a clip");
  contacts->add_option("--model", model_path)->required();
  contacts->add_option("--clip", clip_path)->required();
  contacts->add_option("--config", config_path);
  CLI::App* ret =
      inspect->add_subcommand("ret-schedule", "early-termination threshold");
  ret->add_option("--config", config_path);
  CLI::App* rewards =
      inspect->add_subcommand("rewards", "reward components for a state pair");
  rewards->add_option("--model", model_path)->required();
  rewards->add_option("--input", input_path, "state/reference JSON")
      ->required();
  rewards->add_option("--config", config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Exit-code contract: 0 success, 1 any error, 2 flagged infeasible.
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (retarget->parsed())
      return cmd_retarget(model_path, clip_path, config_path, out_dir, seed,
                          stage, max_rounds);
    if (contacts->parsed())
      return cmd_inspect_contacts(model_path, clip_path, config_path);
    if (ret->parsed()) return cmd_inspect_ret(config_path);
    if (rewards->parsed())
      return cmd_inspect_rewards(model_path, input_path, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
