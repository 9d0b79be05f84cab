#include "safectl/harness/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "safectl/errors.hpp"
#include "safectl/safefilters/gpmpc.hpp"

namespace safectl::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::unique_ptr<control::Controller> make_controller(const ControllerSpec& spec) {
  switch (spec.algo) {
    case Algorithm::Pid:
      return std::make_unique<control::PidController>(spec.pid);
    case Algorithm::Lqr:
      return std::make_unique<control::LqrController>(spec.lqr_mode);
    case Algorithm::Ilqr:
      return std::make_unique<control::IlqrController>(spec.ilqr);
    case Algorithm::Lmpc:
    case Algorithm::Nmpc:
    case Algorithm::GpMpc: {
      control::MpcConfig mc = spec.mpc;
      mc.mode = spec.algo == Algorithm::Lmpc ? control::MpcMode::Linear
                                             : control::MpcMode::Nonlinear;
      return std::make_unique<control::MpcController>(mc);
    }
  }
  throw UnsupportedError("harness: unhandled algorithm");
}

/// Plain prior-model NMPC episodes that feed the residual reservoir.
/// Episode indices are offset so their disturbance/randomization draws never
/// collide with the evaluation episode's.
std::shared_ptr<const safefilters::GpResidualModel> train_residual(
    const ExperimentConfig& cfg, std::uint64_t seed, int episode,
    const envs::ResetInfo& info) {
  safefilters::ResidualDataset data(info.prior_model, info.control_dt,
                                    info.physics_substeps, cfg.controller.gp_capacity, seed);
  for (int k = 0; k < cfg.controller.gp_train_episodes; ++k) {
    envs::Environment env(cfg.env);
    auto [obs, tinfo] = env.reset(seed, 10000 + episode * 64 + k);
    tinfo.prior_model = info.prior_model;
    control::MpcConfig mc = cfg.controller.mpc;
    mc.mode = control::MpcMode::Nonlinear;
    control::MpcController ctrl(mc);
    ctrl.episode_init(tinfo);
    while (!env.done()) {
      const Eigen::VectorXd x_prev = env.true_state();
      Eigen::VectorXd u = ctrl.act(obs, env.current_step());
      auto r = env.step(u);
      data.add(x_prev, r.info.input_applied, r.info.true_state);
      obs = r.obs;
      if (r.info.failure) break;
    }
  }
  return std::make_shared<safefilters::GpResidualModel>(safefilters::GpResidualModel::fit(data));
}

}  // namespace

std::vector<int> rmse_channels(const dynamics::DynamicsModel& model, envs::TaskKind kind) {
  if (kind == envs::TaskKind::Stabilization) {
    std::vector<int> all(model.nx());
    for (int i = 0; i < model.nx(); ++i) all[i] = i;
    return all;
  }
  switch (model.id()) {
    case dynamics::SystemId::CartPole:
      return {0};
    case dynamics::SystemId::Quad1D:
      return {0};
    case dynamics::SystemId::Quad2D:
      return {0, 2};
  }
  return {};
}

EpisodeTrace run_episode(const ExperimentConfig& cfg, std::uint64_t seed, int episode,
                         const dynamics::DynamicsModel* prior_override) {
  EpisodeTrace trace;
  trace.seed = seed;
  trace.episode = episode;
  const auto t0 = std::chrono::steady_clock::now();

  try {
    envs::Environment env(cfg.env);
    auto [obs, info] = env.reset(seed, episode);
    if (prior_override) info.prior_model = *prior_override;
    trace.x0 = info.x0;

    auto controller = make_controller(cfg.controller);
    if (cfg.controller.algo == Algorithm::GpMpc) {
      auto residual = train_residual(cfg, seed, episode, info);
      static_cast<control::MpcController*>(controller.get())->set_residual_model(residual);
    }
    controller->episode_init(info);

    std::unique_ptr<safefilters::MpscFilter> mpsc;
    if (cfg.filter.kind == FilterKind::Mpsc) {
      mpsc = std::make_unique<safefilters::MpscFilter>(cfg.filter.mpsc);
      mpsc->episode_init(info);
    }

    while (!env.done()) {
      const int step = env.current_step();
      StepRecord rec;
      rec.step = step;
      rec.obs = obs;
      rec.u_proposed = controller->act(obs, step);

      Eigen::VectorXd u = rec.u_proposed;
      if (cfg.filter.kind == FilterKind::Cbf) {
        auto fr = safefilters::cbf_filter(cfg.filter.cbf, info.prior_model, u, obs,
                                          info.u_lower, info.u_upper);
        u = fr.u_safe;
        rec.filter_certified = fr.slack <= 0.0;
        rec.filter_modified = fr.modified;
      } else if (cfg.filter.kind == FilterKind::Mpsc) {
        auto fr = mpsc->filter(u, obs, step);
        u = fr.u_safe;
        rec.filter_certified = fr.certified;
        rec.filter_modified = fr.modified;
      }

      auto r = env.step(u);
      rec.u_applied = r.info.input_applied;
      rec.true_state = r.info.true_state;
      rec.reward = r.reward;
      rec.constraint_values = r.info.constraint_values;
      rec.violation = r.info.violation;
      trace.steps.push_back(std::move(rec));
      obs = r.obs;
      if (r.info.failure) {
        trace.failure = true;
        break;
      }
    }
    trace.completed =
        !trace.failure && static_cast<int>(trace.steps.size()) == cfg.env.task.length;
  } catch (const std::exception& e) {
    trace.failure = true;
    trace.error = e.what();
  }

  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return trace;
}

Metrics compute_metrics(const ExperimentConfig& cfg, const EpisodeTrace& trace) {
  Metrics m;
  m.completed = trace.completed;
  m.failure = trace.failure;
  if (trace.steps.empty()) {
    m.rmse = kNaN;
    m.quadratic_cost = kNaN;
    return m;
  }

  const auto channels = rmse_channels(cfg.env.model, cfg.env.task.kind);
  double sq = 0.0;
  int n_viol = 0, n_mod = 0;
  std::vector<Eigen::VectorXd> states, inputs;
  states.reserve(trace.steps.size() + 1);
  inputs.reserve(trace.steps.size());
  states.push_back(trace.x0);
  for (const auto& s : trace.steps) {
    const Eigen::VectorXd& ref = cfg.env.task.x_ref_at(s.step + 1);
    for (int ch : channels) sq += std::pow(s.true_state(ch) - ref(ch), 2);
    if (s.violation) ++n_viol;
    if (s.filter_modified) ++n_mod;
    states.push_back(s.true_state);
    inputs.push_back(s.u_applied);
    m.total_reward += s.reward;
  }
  m.rmse = std::sqrt(sq / (static_cast<double>(trace.steps.size()) * channels.size()));
  m.quadratic_cost = envs::quadratic_cost(cfg.env.task, states, inputs);
  m.violation_fraction = static_cast<double>(n_viol) / trace.steps.size();
  m.filter_modified_fraction = static_cast<double>(n_mod) / trace.steps.size();
  return m;
}

SweepResult robustness_sweep(const ExperimentConfig& base, SweepKind kind,
                             const std::vector<double>& grid,
                             const std::vector<std::uint64_t>& seeds, int workers) {
  SweepResult result;
  result.kind = kind;
  result.points.resize(grid.size());

  // Pre-built per-grid-point configs; the controller keeps the nominal prior
  // for the inertial sweep so mismatch grows away from scale 1.
  std::vector<ExperimentConfig> cfgs;
  cfgs.reserve(grid.size());
  const dynamics::DynamicsModel nominal = base.env.model;
  for (double g : grid) {
    ExperimentConfig c = base;
    if (kind == SweepKind::PoleLength) {
      if (nominal.id() == dynamics::SystemId::CartPole) {
        auto p = nominal.cart_pole_params();
        p.l *= g;
        c.env.model = dynamics::DynamicsModel::cart_pole(p);
      } else {
        c.env.model = nominal.scaled(g);
      }
      // Regenerate the constant reference against the (unchanged) task; the
      // stored x_ref/u_ref came from the nominal equilibrium and still apply.
    } else {
      disturbances::DisturbanceSpec spec;
      spec.target = disturbances::DisturbanceTarget::Action;
      spec.kind = disturbances::DisturbanceSpec::Kind::WhiteNoise;
      const int nu = base.env.model.nu();
      for (int ch = 0; ch < nu; ++ch) spec.channels.push_back(ch);
      spec.sigma = Eigen::VectorXd::Constant(nu, g);
      c.env.disturbance_specs.push_back(std::move(spec));
    }
    cfgs.push_back(std::move(c));
  }

  struct Cell {
    double rmse = kNaN;
    double violation = kNaN;
    bool failed = true;
  };
  std::vector<Cell> cells(grid.size() * seeds.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t job = next.fetch_add(1);
      if (job >= cells.size()) return;
      const size_t gi = job / seeds.size();
      const size_t si = job % seeds.size();
      Cell cell;
      try {
        EpisodeTrace trace =
            run_episode(cfgs[gi], seeds[si], 0,
                        kind == SweepKind::PoleLength ? &nominal : nullptr);
        Metrics m = compute_metrics(cfgs[gi], trace);
        cell.failed = trace.failure;
        if (!trace.failure) {
          cell.rmse = m.rmse;
          cell.violation = m.violation_fraction;
        }
      } catch (const std::exception&) {
        cell.failed = true;
      }
      cells[job] = cell;
    }
  };
  const int n_workers = std::max(1, workers);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (size_t gi = 0; gi < grid.size(); ++gi) {
    SweepPoint& pt = result.points[gi];
    pt.value = grid[gi];
    double sum = 0.0, vsum = 0.0;
    int n = 0;
    for (size_t si = 0; si < seeds.size(); ++si) {
      const Cell& cell = cells[gi * seeds.size() + si];
      pt.rmse.push_back(cell.rmse);
      pt.violation_fraction.push_back(cell.violation);
      if (cell.failed) {
        ++pt.failures;
      } else {
        sum += cell.rmse;
        vsum += cell.violation;
        ++n;
      }
    }
    if (n > 0) {
      pt.rmse_mean = sum / n;
      double devsq = 0.0;
      for (double r : pt.rmse)
        if (std::isfinite(r)) devsq += (r - pt.rmse_mean) * (r - pt.rmse_mean);
      pt.rmse_std = std::sqrt(devsq / n);
      pt.violation_mean = vsum / n;
    } else {
      pt.rmse_mean = pt.rmse_std = pt.violation_mean = kNaN;
    }
  }
  return result;
}

BenchResult benchmark_throughput(const ExperimentConfig& cfg, std::uint64_t seed) {
  BenchResult out;
  EpisodeTrace trace = run_episode(cfg, seed);
  out.steps = static_cast<int>(trace.steps.size());
  out.sim_seconds = out.steps / static_cast<double>(cfg.env.control_hz);
  out.wall_seconds = trace.wall_seconds;
  out.realtime_factor = out.wall_seconds > 0.0 ? out.sim_seconds / out.wall_seconds : 0.0;
  return out;
}

namespace {

/// Shortest exact decimal form; the same bytes for the same double.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_vec(std::string& line, const Eigen::VectorXd& v) {
  for (int i = 0; i < v.size(); ++i) {
    line += ',';
    line += fmt(v(i));
  }
}

}  // namespace

std::string trace_csv(const ExperimentConfig& cfg, const EpisodeTrace& trace) {
  const int nx = cfg.env.model.nx();
  const int nu = cfg.env.model.nu();
  const int nc = cfg.env.constraint_set.total_rows();

  std::string out = "# safectl-trace-v1\n";
  out += "step";
  for (int i = 0; i < nx; ++i) out += ",x" + std::to_string(i);
  for (int i = 0; i < nx; ++i) out += ",obs" + std::to_string(i);
  for (int i = 0; i < nu; ++i) out += ",u_proposed" + std::to_string(i);
  for (int i = 0; i < nu; ++i) out += ",u_applied" + std::to_string(i);
  out += ",reward";
  for (int i = 0; i < nc; ++i) out += ",c" + std::to_string(i);
  out += ",violation,filter_certified,filter_modified\n";

  for (const auto& s : trace.steps) {
    std::string line = std::to_string(s.step);
    append_vec(line, s.true_state);
    append_vec(line, s.obs);
    append_vec(line, s.u_proposed);
    append_vec(line, s.u_applied);
    line += ',';
    line += fmt(s.reward);
    append_vec(line, s.constraint_values);
    line += s.violation ? ",1" : ",0";
    line += s.filter_certified ? ",1" : ",0";
    line += s.filter_modified ? ",1" : ",0";
    out += line;
    out += '\n';
  }
  return out;
}

void export_results(const ExperimentConfig& cfg, const std::vector<EpisodeTrace>& traces,
                    const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream f(fs::path(dir) / "config.yaml", std::ios::binary);
    f << dump_config(cfg);
  }

  nlohmann::json summary;
  summary["schema_version"] = 1;
  {
    const std::time_t now = std::time(nullptr);
    char ts[32];
    std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    summary["created"] = ts;  // the only run-dependent field
  }

  nlohmann::json eps = nlohmann::json::array();
  std::vector<double> rmses;
  double rmse_sum = 0.0, viol_sum = 0.0, cost_sum = 0.0;
  int n_ok = 0, n_completed = 0;
  for (const auto& trace : traces) {
    const std::string name =
        "trace_ep" + std::to_string(trace.episode) + "_seed" + std::to_string(trace.seed) +
        ".csv";
    {
      std::ofstream f(fs::path(dir) / name, std::ios::binary);
      f << trace_csv(cfg, trace);
    }
    Metrics m = compute_metrics(cfg, trace);
    nlohmann::json e;
    e["seed"] = trace.seed;
    e["episode"] = trace.episode;
    e["trace_file"] = name;
    e["completed"] = m.completed;
    e["failure"] = m.failure;
    if (!trace.error.empty()) e["error"] = trace.error;
    e["steps"] = trace.steps.size();
    e["rmse"] = m.rmse;
    e["quadratic_cost"] = m.quadratic_cost;
    e["total_reward"] = m.total_reward;
    e["violation_fraction"] = m.violation_fraction;
    e["filter_modified_fraction"] = m.filter_modified_fraction;
    eps.push_back(std::move(e));
    if (!m.failure && std::isfinite(m.rmse)) {
      rmses.push_back(m.rmse);
      rmse_sum += m.rmse;
      viol_sum += m.violation_fraction;
      cost_sum += m.quadratic_cost;
      ++n_ok;
    }
    if (m.completed) ++n_completed;
  }
  summary["episodes"] = std::move(eps);

  nlohmann::json agg;
  agg["episodes_total"] = traces.size();
  agg["episodes_completed"] = n_completed;
  if (n_ok > 0) {
    const double mean = rmse_sum / n_ok;
    double devsq = 0.0;
    for (double r : rmses) devsq += (r - mean) * (r - mean);
    agg["rmse_mean"] = mean;
    agg["rmse_std"] = std::sqrt(devsq / n_ok);
    agg["violation_fraction_mean"] = viol_sum / n_ok;
    agg["quadratic_cost_mean"] = cost_sum / n_ok;
  }
  summary["aggregate"] = std::move(agg);

  std::ofstream f(fs::path(dir) / "summary.json", std::ios::binary);
  f << summary.dump(2) << "\n";
}

}  // namespace safectl::harness
