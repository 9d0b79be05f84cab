#include "safectl/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "safectl/errors.hpp"

namespace safectl::harness {

namespace {

using dynamics::DynamicsModel;
using dynamics::SystemId;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void check_keys(const YAML::Node& node, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail(path, "expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

template <typename T>
T get_or(const YAML::Node& node, const std::string& key, const std::string& path, T fallback) {
  if (!node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    fail(path + "." + key, "invalid value");
  }
}

Eigen::VectorXd get_vector(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(path, "expected a sequence of numbers");
  Eigen::VectorXd v(node.size());
  for (size_t i = 0; i < node.size(); ++i) {
    try {
      v(static_cast<int>(i)) = node[i].as<double>();
    } catch (const YAML::Exception&) {
      fail(path, "invalid number");
    }
  }
  return v;
}

Eigen::MatrixXd get_matrix(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence() || node.size() == 0) fail(path, "expected a sequence of rows");
  const size_t cols = node[0].size();
  Eigen::MatrixXd m(node.size(), cols);
  for (size_t i = 0; i < node.size(); ++i) {
    Eigen::VectorXd row = get_vector(node[i], path);
    if (static_cast<size_t>(row.size()) != cols) fail(path, "ragged rows");
    m.row(static_cast<int>(i)) = row;
  }
  return m;
}

std::vector<int> get_ints(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(path, "expected a sequence of indices");
  std::vector<int> v;
  for (const auto& e : node) {
    try {
      v.push_back(e.as<int>());
    } catch (const YAML::Exception&) {
      fail(path, "invalid index");
    }
  }
  return v;
}

template <typename E>
E parse_enum(const std::string& value, const std::string& path,
             const std::map<std::string, E>& table) {
  auto it = table.find(value);
  if (it == table.end()) {
    std::string options;
    for (const auto& [k, _] : table) options += (options.empty() ? "" : "|") + k;
    fail(path, "'" + value + "' is not one of " + options);
  }
  return it->second;
}

const std::map<std::string, SystemId> kSystems = {
    {"cart_pole", SystemId::CartPole},
    {"quad_1d", SystemId::Quad1D},
    {"quad_2d", SystemId::Quad2D}};
const std::map<std::string, Algorithm> kAlgos = {
    {"pid", Algorithm::Pid},   {"lqr", Algorithm::Lqr},   {"ilqr", Algorithm::Ilqr},
    {"lmpc", Algorithm::Lmpc}, {"nmpc", Algorithm::Nmpc}, {"gpmpc", Algorithm::GpMpc}};
const std::map<std::string, FilterKind> kFilters = {
    {"none", FilterKind::None}, {"cbf", FilterKind::Cbf}, {"mpsc", FilterKind::Mpsc}};
const std::map<std::string, envs::TrajShape> kShapes = {
    {"circle", envs::TrajShape::Circle},
    {"sine", envs::TrajShape::Sine},
    {"lemniscate", envs::TrajShape::Lemniscate},
    {"square", envs::TrajShape::Square}};

DynamicsModel parse_system(const YAML::Node& node) {
  check_keys(node, "system", {"name", "params"});
  if (!node["name"]) fail("system.name", "required");
  const SystemId id = parse_enum(node["name"].as<std::string>(), "system.name", kSystems);
  const YAML::Node p = node["params"] ? node["params"] : YAML::Node(YAML::NodeType::Map);
  switch (id) {
    case SystemId::CartPole: {
      check_keys(p, "system.params", {"m_c", "m_p", "l", "g"});
      dynamics::CartPoleParams cp;
      cp.m_c = get_or(p, "m_c", "system.params", cp.m_c);
      cp.m_p = get_or(p, "m_p", "system.params", cp.m_p);
      cp.l = get_or(p, "l", "system.params", cp.l);
      cp.g = get_or(p, "g", "system.params", cp.g);
      return DynamicsModel::cart_pole(cp);
    }
    case SystemId::Quad1D: {
      check_keys(p, "system.params", {"m", "g"});
      dynamics::Quad1DParams qp;
      qp.m = get_or(p, "m", "system.params", qp.m);
      qp.g = get_or(p, "g", "system.params", qp.g);
      return DynamicsModel::quad_1d(qp);
    }
    case SystemId::Quad2D: {
      check_keys(p, "system.params", {"m", "i_yy", "l_arm", "g"});
      dynamics::Quad2DParams qp;
      qp.m = get_or(p, "m", "system.params", qp.m);
      qp.I_yy = get_or(p, "i_yy", "system.params", qp.I_yy);
      qp.l_arm = get_or(p, "l_arm", "system.params", qp.l_arm);
      qp.g = get_or(p, "g", "system.params", qp.g);
      return DynamicsModel::quad_2d(qp);
    }
  }
  fail("system.name", "unhandled system");
}

disturbances::ChannelDist parse_channel_dist(const YAML::Node& node, const std::string& path) {
  check_keys(node, path, {"kind", "lo", "hi", "mu", "sigma"});
  disturbances::ChannelDist d;
  const std::string kind = get_or<std::string>(node, "kind", path, "none");
  if (kind == "none") {
    d.kind = disturbances::ChannelDist::Kind::None;
  } else if (kind == "uniform") {
    d.kind = disturbances::ChannelDist::Kind::Uniform;
    d.lo = get_or(node, "lo", path, 0.0);
    d.hi = get_or(node, "hi", path, 0.0);
  } else if (kind == "gaussian") {
    d.kind = disturbances::ChannelDist::Kind::Gaussian;
    d.mu = get_or(node, "mu", path, 0.0);
    d.sigma = get_or(node, "sigma", path, 0.0);
  } else {
    fail(path + ".kind", "'" + kind + "' is not one of none|uniform|gaussian");
  }
  return d;
}

}  // namespace

std::string to_string(Algorithm a) {
  for (const auto& [k, v] : kAlgos)
    if (v == a) return k;
  return "?";
}

std::string to_string(FilterKind k) {
  for (const auto& [n, v] : kFilters)
    if (v == k) return n;
  return "?";
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  check_keys(root, "",
             {"system", "task", "controller", "filter", "constraints", "disturbances",
              "randomization", "rates", "x0", "input_bounds", "seeds", "output_dir"});

  ExperimentConfig cfg;
  if (!root["system"]) fail("system", "required");
  cfg.env.model = parse_system(root["system"]);
  const int nx = cfg.env.model.nx();
  const int nu = cfg.env.model.nu();

  // --- task ---
  {
    const YAML::Node t = root["task"] ? root["task"] : YAML::Node(YAML::NodeType::Map);
    check_keys(t, "task",
               {"kind", "reward", "length", "theta_max", "q_diag", "r_diag", "trajectory"});
    envs::TaskSpec& task = cfg.env.task;
    const std::string kind = get_or<std::string>(t, "kind", "task", "stabilization");
    if (kind == "stabilization") {
      task.kind = envs::TaskKind::Stabilization;
    } else if (kind == "tracking") {
      task.kind = envs::TaskKind::Tracking;
    } else {
      fail("task.kind", "'" + kind + "' is not one of stabilization|tracking");
    }
    const std::string reward = get_or<std::string>(t, "reward", "task", "quadratic");
    if (reward == "quadratic") {
      task.reward = envs::RewardKind::Quadratic;
    } else if (reward == "sparse_cart_pole") {
      if (cfg.env.model.id() != SystemId::CartPole)
        fail("task.reward", "sparse_cart_pole requires system.name == cart_pole");
      task.reward = envs::RewardKind::SparseCartPole;
    } else {
      fail("task.reward", "'" + reward + "' is not one of quadratic|sparse_cart_pole");
    }
    task.length = get_or(t, "length", "task", 250);
    if (task.length < 1) fail("task.length", "must be >= 1");
    task.theta_max = get_or(t, "theta_max", "task", 0.2094);
    task.Q = Eigen::MatrixXd::Identity(nx, nx);
    task.R = Eigen::MatrixXd::Identity(nu, nu);
    if (t["q_diag"]) {
      Eigen::VectorXd q = get_vector(t["q_diag"], "task.q_diag");
      if (q.size() != nx) fail("task.q_diag", "expected " + std::to_string(nx) + " entries");
      task.Q = q.asDiagonal();
    }
    if (t["r_diag"]) {
      Eigen::VectorXd r = get_vector(t["r_diag"], "task.r_diag");
      if (r.size() != nu) fail("task.r_diag", "expected " + std::to_string(nu) + " entries");
      task.R = r.asDiagonal();
    }
    if (task.kind == envs::TaskKind::Tracking) {
      if (!t["trajectory"]) fail("task.trajectory", "required for tracking tasks");
      const YAML::Node tr = t["trajectory"];
      check_keys(tr, "task.trajectory", {"shape", "scale", "period", "z_offset"});
      cfg.has_trajectory = true;
      cfg.trajectory.shape = parse_enum(
          get_or<std::string>(tr, "shape", "task.trajectory", "circle"),
          "task.trajectory.shape", kShapes);
      cfg.trajectory.scale = get_or(tr, "scale", "task.trajectory", 1.0);
      cfg.trajectory.period = get_or(tr, "period", "task.trajectory", 5.0);
      cfg.trajectory.z_offset = get_or(tr, "z_offset", "task.trajectory", 1.0);
    } else if (t["trajectory"]) {
      fail("task.trajectory", "only valid for tracking tasks");
    }
  }

  // --- rates (needed before reference generation) ---
  {
    const YAML::Node r = root["rates"] ? root["rates"] : YAML::Node(YAML::NodeType::Map);
    check_keys(r, "rates", {"physics_hz", "control_hz"});
    cfg.env.physics_hz = get_or(r, "physics_hz", "rates", 1000);
    cfg.env.control_hz = get_or(r, "control_hz", "rates", 50);
    if (cfg.env.control_hz < 1 || cfg.env.physics_hz < cfg.env.control_hz ||
        cfg.env.physics_hz % cfg.env.control_hz != 0)
      fail("rates", "physics_hz must be a positive multiple of control_hz");
  }

  // Reference generation (tracking) or constant equilibrium reference.
  if (cfg.has_trajectory) {
    auto ref = envs::generate_trajectory(cfg.trajectory, cfg.env.task.length,
                                         1.0 / cfg.env.control_hz, cfg.env.model);
    cfg.env.task.x_ref = std::move(ref.x_ref);
    cfg.env.task.u_ref = std::move(ref.u_ref);
  } else {
    cfg.env.task.x_ref.assign(cfg.env.task.length + 1, cfg.env.model.equilibrium_state());
    cfg.env.task.u_ref.assign(cfg.env.task.length, cfg.env.model.equilibrium_input());
  }

  // --- controller ---
  {
    const YAML::Node c = root["controller"] ? root["controller"] : YAML::Node(YAML::NodeType::Map);
    check_keys(c, "controller",
               {"algorithm", "lqr_mode", "horizon", "sqp_iters", "sqp_damping", "z_score",
                "constraint_margin", "slack_penalty", "warm_start", "max_iter", "cost_tol",
                "kp_pos", "kd_pos", "ki_pos", "integral_limit", "kp_att", "kd_att",
                "gp_train_episodes", "gp_capacity"});
    ControllerSpec& cs = cfg.controller;
    cs.algo = parse_enum(get_or<std::string>(c, "algorithm", "controller", "lqr"),
                         "controller.algorithm", kAlgos);
    const std::string mode = get_or<std::string>(c, "lqr_mode", "controller", "discrete");
    if (mode == "discrete") {
      cs.lqr_mode = control::LqrMode::Discrete;
    } else if (mode == "continuous") {
      cs.lqr_mode = control::LqrMode::Continuous;
    } else {
      fail("controller.lqr_mode", "'" + mode + "' is not one of discrete|continuous");
    }
    cs.mpc.horizon = get_or(c, "horizon", "controller", cs.mpc.horizon);
    if (cs.mpc.horizon < 1) fail("controller.horizon", "must be >= 1");
    cs.mpc.sqp_iters = get_or(c, "sqp_iters", "controller", cs.mpc.sqp_iters);
    cs.mpc.sqp_damping = get_or(c, "sqp_damping", "controller", cs.mpc.sqp_damping);
    cs.mpc.z_score = get_or(c, "z_score", "controller", cs.mpc.z_score);
    cs.mpc.constraint_margin =
        get_or(c, "constraint_margin", "controller", cs.mpc.constraint_margin);
    cs.mpc.slack_penalty = get_or(c, "slack_penalty", "controller", cs.mpc.slack_penalty);
    cs.mpc.warm_start = get_or(c, "warm_start", "controller", cs.mpc.warm_start);
    cs.mpc.mode =
        cs.algo == Algorithm::Lmpc ? control::MpcMode::Linear : control::MpcMode::Nonlinear;
    cs.ilqr.max_iter = get_or(c, "max_iter", "controller", cs.ilqr.max_iter);
    cs.ilqr.cost_tol = get_or(c, "cost_tol", "controller", cs.ilqr.cost_tol);
    cs.pid.kp_pos = get_or(c, "kp_pos", "controller", cs.pid.kp_pos);
    cs.pid.kd_pos = get_or(c, "kd_pos", "controller", cs.pid.kd_pos);
    cs.pid.ki_pos = get_or(c, "ki_pos", "controller", cs.pid.ki_pos);
    cs.pid.integral_limit = get_or(c, "integral_limit", "controller", cs.pid.integral_limit);
    cs.pid.kp_att = get_or(c, "kp_att", "controller", cs.pid.kp_att);
    cs.pid.kd_att = get_or(c, "kd_att", "controller", cs.pid.kd_att);
    cs.gp_train_episodes = get_or(c, "gp_train_episodes", "controller", cs.gp_train_episodes);
    cs.gp_capacity = get_or(c, "gp_capacity", "controller", cs.gp_capacity);
    if (cs.algo == Algorithm::Pid && cfg.env.model.id() == SystemId::CartPole)
      fail("controller.algorithm", "pid does not support cart_pole");
  }

  // --- filter ---
  {
    const YAML::Node f = root["filter"] ? root["filter"] : YAML::Node(YAML::NodeType::Map);
    check_keys(f, "filter",
               {"kind", "selector", "p_rows", "center", "level", "gamma", "margin",
                "slack_penalty", "horizon", "terminal_halfwidth", "constraint_margin"});
    FilterSpec& fs = cfg.filter;
    fs.kind = parse_enum(get_or<std::string>(f, "kind", "filter", "none"), "filter.kind",
                         kFilters);
    if (fs.kind == FilterKind::Cbf) {
      if (!f["selector"] || !f["p_rows"]) fail("filter", "cbf requires selector and p_rows");
      fs.cbf.selector = get_ints(f["selector"], "filter.selector");
      for (int ch : fs.cbf.selector)
        if (ch < 0 || ch >= nx) fail("filter.selector", "state index out of range");
      fs.cbf.P = get_matrix(f["p_rows"], "filter.p_rows");
      const int d = static_cast<int>(fs.cbf.selector.size());
      if (fs.cbf.P.rows() != d || fs.cbf.P.cols() != d)
        fail("filter.p_rows", "must be selector-size square");
      fs.cbf.center = f["center"] ? get_vector(f["center"], "filter.center")
                                  : Eigen::VectorXd::Zero(d);
      if (fs.cbf.center.size() != d) fail("filter.center", "must match selector size");
      fs.cbf.level = get_or(f, "level", "filter", fs.cbf.level);
      fs.cbf.gamma = get_or(f, "gamma", "filter", fs.cbf.gamma);
      fs.cbf.margin = get_or(f, "margin", "filter", fs.cbf.margin);
      fs.cbf.slack_penalty = get_or(f, "slack_penalty", "filter", fs.cbf.slack_penalty);
      if (fs.cbf.gamma <= 0) fail("filter.gamma", "must be > 0");
    } else if (fs.kind == FilterKind::Mpsc) {
      fs.mpsc.horizon = get_or(f, "horizon", "filter", fs.mpsc.horizon);
      fs.mpsc.terminal_halfwidth =
          get_or(f, "terminal_halfwidth", "filter", fs.mpsc.terminal_halfwidth);
      fs.mpsc.slack_penalty = get_or(f, "slack_penalty", "filter", fs.mpsc.slack_penalty);
      fs.mpsc.constraint_margin =
          get_or(f, "constraint_margin", "filter", fs.mpsc.constraint_margin);
    }
  }

  // --- constraints ---
  if (root["constraints"]) {
    const YAML::Node cs = root["constraints"];
    if (!cs.IsSequence()) fail("constraints", "expected a sequence");
    for (size_t i = 0; i < cs.size(); ++i) {
      const std::string path = "constraints[" + std::to_string(i) + "]";
      const YAML::Node c = cs[i];
      check_keys(c, path,
                 {"form", "target", "selector", "lower", "upper", "a_rows", "b", "p_rows",
                  "r", "margin"});
      const std::string target_s = get_or<std::string>(c, "target", path, "state");
      constraints::ConstraintTarget target;
      int dim_limit;
      if (target_s == "state") {
        target = constraints::ConstraintTarget::State;
        dim_limit = nx;
      } else if (target_s == "input") {
        target = constraints::ConstraintTarget::Input;
        dim_limit = nu;
      } else if (target_s == "both") {
        target = constraints::ConstraintTarget::Both;
        dim_limit = nx + nu;
      } else {
        fail(path + ".target", "'" + target_s + "' is not one of state|input|both");
      }
      if (!c["selector"]) fail(path + ".selector", "required");
      std::vector<int> sel = get_ints(c["selector"], path + ".selector");
      for (int ch : sel)
        if (ch < 0 || ch >= dim_limit) fail(path + ".selector", "index out of range");

      const std::string form = get_or<std::string>(c, "form", path, "bound");
      constraints::ConstraintSpec spec;
      if (form == "bound") {
        if (!c["lower"] || !c["upper"]) fail(path, "bound requires lower and upper");
        spec = constraints::ConstraintSpec::bound(target, sel,
                                                  get_vector(c["lower"], path + ".lower"),
                                                  get_vector(c["upper"], path + ".upper"));
      } else if (form == "linear") {
        if (!c["a_rows"] || !c["b"]) fail(path, "linear requires a_rows and b");
        spec = constraints::ConstraintSpec::linear(target, sel,
                                                   get_matrix(c["a_rows"], path + ".a_rows"),
                                                   get_vector(c["b"], path + ".b"));
      } else if (form == "quadratic") {
        if (!c["p_rows"]) fail(path, "quadratic requires p_rows");
        spec = constraints::ConstraintSpec::quadratic(target, sel,
                                                      get_matrix(c["p_rows"], path + ".p_rows"),
                                                      get_or(c, "r", path, 0.0));
      } else {
        fail(path + ".form", "'" + form + "' is not one of bound|linear|quadratic");
      }
      spec.margin = get_or(c, "margin", path, 0.0);
      cfg.env.constraint_set.items.push_back(std::move(spec));
    }
  }

  // --- disturbances ---
  if (root["disturbances"]) {
    const YAML::Node ds = root["disturbances"];
    if (!ds.IsSequence()) fail("disturbances", "expected a sequence");
    for (size_t i = 0; i < ds.size(); ++i) {
      const std::string path = "disturbances[" + std::to_string(i) + "]";
      const YAML::Node d = ds[i];
      check_keys(d, path, {"target", "kind", "sigma", "magnitude", "onset_step", "channels"});
      disturbances::DisturbanceSpec spec;
      const std::string target = get_or<std::string>(d, "target", path, "action");
      int dim;
      if (target == "action") {
        spec.target = disturbances::DisturbanceTarget::Action;
        dim = nu;
      } else if (target == "observation") {
        spec.target = disturbances::DisturbanceTarget::Observation;
        dim = nx;
      } else if (target == "dynamics") {
        spec.target = disturbances::DisturbanceTarget::Dynamics;
        dim = static_cast<int>(cfg.env.model.accel_channels().size());
      } else {
        fail(path + ".target", "'" + target + "' is not one of action|observation|dynamics");
      }
      const std::string kind = get_or<std::string>(d, "kind", path, "white_noise");
      if (kind == "white_noise") {
        spec.kind = disturbances::DisturbanceSpec::Kind::WhiteNoise;
        if (!d["sigma"]) fail(path + ".sigma", "required for white_noise");
      } else if (kind == "step") {
        spec.kind = disturbances::DisturbanceSpec::Kind::Step;
        if (!d["magnitude"]) fail(path + ".magnitude", "required for step");
      } else if (kind == "impulse") {
        spec.kind = disturbances::DisturbanceSpec::Kind::Impulse;
        if (!d["magnitude"]) fail(path + ".magnitude", "required for impulse");
      } else {
        fail(path + ".kind", "'" + kind + "' is not one of white_noise|step|impulse");
      }
      spec.channels = d["channels"] ? get_ints(d["channels"], path + ".channels")
                                    : std::vector<int>{};
      if (spec.channels.empty())
        for (int ch = 0; ch < dim; ++ch) spec.channels.push_back(ch);
      for (int ch : spec.channels)
        if (ch < 0 || ch >= dim) fail(path + ".channels", "index out of range");
      const int nch = static_cast<int>(spec.channels.size());
      if (d["sigma"]) {
        spec.sigma = get_vector(d["sigma"], path + ".sigma");
        if (spec.sigma.size() == 1) spec.sigma = Eigen::VectorXd::Constant(nch, spec.sigma(0));
        if (spec.sigma.size() != nch) fail(path + ".sigma", "size must match channels");
      }
      if (d["magnitude"]) {
        spec.magnitude = get_vector(d["magnitude"], path + ".magnitude");
        if (spec.magnitude.size() == 1)
          spec.magnitude = Eigen::VectorXd::Constant(nch, spec.magnitude(0));
        if (spec.magnitude.size() != nch) fail(path + ".magnitude", "size must match channels");
      }
      spec.onset_step = get_or(d, "onset_step", path, 0);
      cfg.env.disturbance_specs.push_back(std::move(spec));
    }
  }

  // --- randomization ---
  if (root["randomization"]) {
    const YAML::Node r = root["randomization"];
    check_keys(r, "randomization", {"prior_scaling", "x0", "params"});
    cfg.env.randomization.prior_scaling = get_or(r, "prior_scaling", "randomization", 1.0);
    if (cfg.env.randomization.prior_scaling <= 0)
      fail("randomization.prior_scaling", "must be > 0");
    if (r["x0"]) {
      const YAML::Node xs = r["x0"];
      if (!xs.IsSequence()) fail("randomization.x0", "expected a sequence");
      if (static_cast<int>(xs.size()) != nx)
        fail("randomization.x0", "expected " + std::to_string(nx) + " channel entries");
      for (size_t i = 0; i < xs.size(); ++i)
        cfg.env.randomization.x0_dist.push_back(
            parse_channel_dist(xs[i], "randomization.x0[" + std::to_string(i) + "]"));
    }
    if (r["params"]) {
      const YAML::Node ps = r["params"];
      if (!ps.IsSequence()) fail("randomization.params", "expected a sequence");
      for (size_t i = 0; i < ps.size(); ++i)
        cfg.env.randomization.param_dist.push_back(
            parse_channel_dist(ps[i], "randomization.params[" + std::to_string(i) + "]"));
    }
  }

  // --- x0, input bounds, seeds, output ---
  if (root["x0"]) {
    cfg.env.x0_nominal = get_vector(root["x0"], "x0");
    if (cfg.env.x0_nominal.size() != nx)
      fail("x0", "expected " + std::to_string(nx) + " entries");
  } else {
    cfg.env.x0_nominal = cfg.env.model.equilibrium_state();
  }
  if (root["input_bounds"]) {
    const YAML::Node b = root["input_bounds"];
    check_keys(b, "input_bounds", {"lower", "upper"});
    if (!b["lower"] || !b["upper"]) fail("input_bounds", "requires lower and upper");
    cfg.env.u_lower = get_vector(b["lower"], "input_bounds.lower");
    cfg.env.u_upper = get_vector(b["upper"], "input_bounds.upper");
    if (cfg.env.u_lower.size() != nu || cfg.env.u_upper.size() != nu)
      fail("input_bounds", "expected " + std::to_string(nu) + " entries");
  } else {
    // Same defaults the environment applies; made explicit for canonical dumps.
    envs::Environment tmp(cfg.env);
    cfg.env.u_lower = tmp.config().u_lower;
    cfg.env.u_upper = tmp.config().u_upper;
  }
  if (root["seeds"]) {
    cfg.seeds.clear();
    for (const auto& s : root["seeds"]) cfg.seeds.push_back(s.as<std::uint64_t>());
    if (cfg.seeds.empty()) fail("seeds", "must not be empty");
  }
  cfg.output_dir = get_or<std::string>(root, "output_dir", "", "results");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

YAML::Node dump_vector(const Eigen::VectorXd& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (int i = 0; i < v.size(); ++i) n.push_back(v(i));
  return n;
}

YAML::Node dump_matrix(const Eigen::MatrixXd& m) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (int i = 0; i < m.rows(); ++i) n.push_back(dump_vector(m.row(i)));
  return n;
}

YAML::Node dump_ints(const std::vector<int>& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (int i : v) n.push_back(i);
  return n;
}

YAML::Node dump_channel_dist(const disturbances::ChannelDist& d) {
  YAML::Node n;
  switch (d.kind) {
    case disturbances::ChannelDist::Kind::None:
      n["kind"] = "none";
      break;
    case disturbances::ChannelDist::Kind::Uniform:
      n["kind"] = "uniform";
      n["lo"] = d.lo;
      n["hi"] = d.hi;
      break;
    case disturbances::ChannelDist::Kind::Gaussian:
      n["kind"] = "gaussian";
      n["mu"] = d.mu;
      n["sigma"] = d.sigma;
      break;
  }
  return n;
}

}  // namespace

std::string dump_config(const ExperimentConfig& cfg) {
  YAML::Node root;
  const auto& model = cfg.env.model;

  YAML::Node system;
  YAML::Node params;
  switch (model.id()) {
    case SystemId::CartPole: {
      system["name"] = "cart_pole";
      const auto& p = model.cart_pole_params();
      params["m_c"] = p.m_c;
      params["m_p"] = p.m_p;
      params["l"] = p.l;
      params["g"] = p.g;
      break;
    }
    case SystemId::Quad1D: {
      system["name"] = "quad_1d";
      const auto& p = model.quad_1d_params();
      params["m"] = p.m;
      params["g"] = p.g;
      break;
    }
    case SystemId::Quad2D: {
      system["name"] = "quad_2d";
      const auto& p = model.quad_2d_params();
      params["m"] = p.m;
      params["i_yy"] = p.I_yy;
      params["l_arm"] = p.l_arm;
      params["g"] = p.g;
      break;
    }
  }
  system["params"] = params;
  root["system"] = system;

  YAML::Node task;
  task["kind"] =
      cfg.env.task.kind == envs::TaskKind::Stabilization ? "stabilization" : "tracking";
  task["reward"] = cfg.env.task.reward == envs::RewardKind::Quadratic ? "quadratic"
                                                                      : "sparse_cart_pole";
  task["length"] = cfg.env.task.length;
  task["theta_max"] = cfg.env.task.theta_max;
  task["q_diag"] = dump_vector(cfg.env.task.Q.diagonal());
  task["r_diag"] = dump_vector(cfg.env.task.R.diagonal());
  if (cfg.has_trajectory) {
    YAML::Node tr;
    for (const auto& [k, v] : kShapes)
      if (v == cfg.trajectory.shape) tr["shape"] = k;
    tr["scale"] = cfg.trajectory.scale;
    tr["period"] = cfg.trajectory.period;
    tr["z_offset"] = cfg.trajectory.z_offset;
    task["trajectory"] = tr;
  }
  root["task"] = task;

  YAML::Node ctl;
  ctl["algorithm"] = to_string(cfg.controller.algo);
  ctl["lqr_mode"] =
      cfg.controller.lqr_mode == control::LqrMode::Discrete ? "discrete" : "continuous";
  ctl["horizon"] = cfg.controller.mpc.horizon;
  ctl["sqp_iters"] = cfg.controller.mpc.sqp_iters;
  ctl["sqp_damping"] = cfg.controller.mpc.sqp_damping;
  ctl["z_score"] = cfg.controller.mpc.z_score;
  ctl["constraint_margin"] = cfg.controller.mpc.constraint_margin;
  ctl["slack_penalty"] = cfg.controller.mpc.slack_penalty;
  ctl["warm_start"] = cfg.controller.mpc.warm_start;
  ctl["max_iter"] = cfg.controller.ilqr.max_iter;
  ctl["cost_tol"] = cfg.controller.ilqr.cost_tol;
  ctl["kp_pos"] = cfg.controller.pid.kp_pos;
  ctl["kd_pos"] = cfg.controller.pid.kd_pos;
  ctl["ki_pos"] = cfg.controller.pid.ki_pos;
  ctl["integral_limit"] = cfg.controller.pid.integral_limit;
  ctl["kp_att"] = cfg.controller.pid.kp_att;
  ctl["kd_att"] = cfg.controller.pid.kd_att;
  ctl["gp_train_episodes"] = cfg.controller.gp_train_episodes;
  ctl["gp_capacity"] = cfg.controller.gp_capacity;
  root["controller"] = ctl;

  YAML::Node filt;
  filt["kind"] = to_string(cfg.filter.kind);
  if (cfg.filter.kind == FilterKind::Cbf) {
    filt["selector"] = dump_ints(cfg.filter.cbf.selector);
    filt["p_rows"] = dump_matrix(cfg.filter.cbf.P);
    filt["center"] = dump_vector(cfg.filter.cbf.center);
    filt["level"] = cfg.filter.cbf.level;
    filt["gamma"] = cfg.filter.cbf.gamma;
    filt["margin"] = cfg.filter.cbf.margin;
    filt["slack_penalty"] = cfg.filter.cbf.slack_penalty;
  } else if (cfg.filter.kind == FilterKind::Mpsc) {
    filt["horizon"] = cfg.filter.mpsc.horizon;
    filt["terminal_halfwidth"] = cfg.filter.mpsc.terminal_halfwidth;
    filt["slack_penalty"] = cfg.filter.mpsc.slack_penalty;
    filt["constraint_margin"] = cfg.filter.mpsc.constraint_margin;
  }
  root["filter"] = filt;

  if (!cfg.env.constraint_set.items.empty()) {
    YAML::Node cs(YAML::NodeType::Sequence);
    for (const auto& item : cfg.env.constraint_set.items) {
      YAML::Node c;
      switch (item.form) {
        case constraints::ConstraintSpec::Form::Bound:
          c["form"] = "bound";
          break;
        case constraints::ConstraintSpec::Form::Linear:
          c["form"] = "linear";
          break;
        case constraints::ConstraintSpec::Form::Quadratic:
          c["form"] = "quadratic";
          break;
      }
      switch (item.target) {
        case constraints::ConstraintTarget::State:
          c["target"] = "state";
          break;
        case constraints::ConstraintTarget::Input:
          c["target"] = "input";
          break;
        case constraints::ConstraintTarget::Both:
          c["target"] = "both";
          break;
      }
      c["selector"] = dump_ints(item.selector);
      if (item.form == constraints::ConstraintSpec::Form::Bound) {
        c["lower"] = dump_vector(item.lower);
        c["upper"] = dump_vector(item.upper);
      } else if (item.form == constraints::ConstraintSpec::Form::Linear) {
        c["a_rows"] = dump_matrix(item.A);
        c["b"] = dump_vector(item.b);
      } else {
        c["p_rows"] = dump_matrix(item.P);
        c["r"] = item.r;
      }
      c["margin"] = item.margin;
      cs.push_back(c);
    }
    root["constraints"] = cs;
  }

  if (!cfg.env.disturbance_specs.empty()) {
    YAML::Node ds(YAML::NodeType::Sequence);
    for (const auto& spec : cfg.env.disturbance_specs) {
      YAML::Node d;
      switch (spec.target) {
        case disturbances::DisturbanceTarget::Action:
          d["target"] = "action";
          break;
        case disturbances::DisturbanceTarget::Observation:
          d["target"] = "observation";
          break;
        case disturbances::DisturbanceTarget::Dynamics:
          d["target"] = "dynamics";
          break;
      }
      switch (spec.kind) {
        case disturbances::DisturbanceSpec::Kind::WhiteNoise:
          d["kind"] = "white_noise";
          d["sigma"] = dump_vector(spec.sigma);
          break;
        case disturbances::DisturbanceSpec::Kind::Step:
          d["kind"] = "step";
          d["magnitude"] = dump_vector(spec.magnitude);
          break;
        case disturbances::DisturbanceSpec::Kind::Impulse:
          d["kind"] = "impulse";
          d["magnitude"] = dump_vector(spec.magnitude);
          break;
      }
      d["onset_step"] = spec.onset_step;
      d["channels"] = dump_ints(spec.channels);
      ds.push_back(d);
    }
    root["disturbances"] = ds;
  }

  {
    YAML::Node r;
    r["prior_scaling"] = cfg.env.randomization.prior_scaling;
    if (!cfg.env.randomization.x0_dist.empty()) {
      YAML::Node xs(YAML::NodeType::Sequence);
      for (const auto& d : cfg.env.randomization.x0_dist) xs.push_back(dump_channel_dist(d));
      r["x0"] = xs;
    }
    if (!cfg.env.randomization.param_dist.empty()) {
      YAML::Node ps(YAML::NodeType::Sequence);
      for (const auto& d : cfg.env.randomization.param_dist)
        ps.push_back(dump_channel_dist(d));
      r["params"] = ps;
    }
    root["randomization"] = r;
  }

  {
    YAML::Node rates;
    rates["physics_hz"] = cfg.env.physics_hz;
    rates["control_hz"] = cfg.env.control_hz;
    root["rates"] = rates;
  }
  root["x0"] = dump_vector(cfg.env.x0_nominal);
  {
    YAML::Node b;
    b["lower"] = dump_vector(cfg.env.u_lower);
    b["upper"] = dump_vector(cfg.env.u_upper);
    root["input_bounds"] = b;
  }
  {
    YAML::Node s(YAML::NodeType::Sequence);
    for (auto seed : cfg.seeds) s.push_back(seed);
    root["seeds"] = s;
  }
  root["output_dir"] = cfg.output_dir;

  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

std::string apply_override(const std::string& yaml_text, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: override must look like key.path=value, got '" + assignment +
                      "'");
  const std::string keypath = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  if (!root.IsMap()) root = YAML::Node(YAML::NodeType::Map);

  std::vector<std::string> parts;
  std::stringstream ss(keypath);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("config: empty segment in override path " + keypath);
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("config: empty override path");

  // Walk/extend the mapping chain, then assign the scalar (or flow sequence).
  std::vector<YAML::Node> chain{root};
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next || !next.IsMap()) {
      next = YAML::Node(YAML::NodeType::Map);
      chain.back()[parts[i]] = next;
    }
    chain.push_back(next);
  }
  chain.back()[parts.back()] = YAML::Load(value);

  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace safectl::harness
