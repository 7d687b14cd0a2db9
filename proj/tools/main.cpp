#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <bicopter/arma.hpp>
#include <bicopter/dynamics.hpp>
#include <bicopter/fuzzy.hpp>
#include <bicopter/io.hpp>
#include <bicopter/lqr.hpp>
#include <bicopter/run_config.hpp>
#include <bicopter/sim.hpp>
#include <bicopter/trajopt.hpp>

namespace {

using namespace bicopter;

std::string fmt(double v) { return io::format_double(v); }

cfg::RunConfig load(const std::string& config_path) {
  if (config_path.empty()) {
    cfg::RunConfig c = cfg::default_config();
    cfg::validate(c);
    return c;
  }
  return cfg::load_config(config_path);
}

State parse_ic(const std::string& ic) {
  State x0 = State::Zero();
  if (ic.empty()) return x0;
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = ic.find(',', start);
    if (pos == std::string::npos) {
      f.push_back(ic.substr(start));
      break;
    }
    f.push_back(ic.substr(start, pos - start));
    start = pos + 1;
  }
  if (f.size() != 6) {
    throw std::invalid_argument("--ic expects 6 comma-separated values");
  }
  for (int i = 0; i < 6; ++i) {
    const auto from = f[i].find_first_not_of(" \t");
    const auto to = f[i].find_last_not_of(" \t");
    const std::string tok =
        from == std::string::npos ? "" : f[i].substr(from, to - from + 1);
    if (!io::try_parse_double(tok, x0[i])) {
      throw std::invalid_argument("--ic has bad number '" + f[i] + "'");
    }
  }
  return x0;
}

void arma_controllers_from_file(const io::ArmaModelFile& m,
                                arma::ArmaController& pos,
                                arma::ArmaController& ang) {
  pos = arma::make_controller(m.l_w, m.position_emits_both ? 2 : 1, 2);
  pos.theta = m.theta_pos;
  if (!m.position_emits_both) {
    ang = arma::make_controller(m.l_w, 1, 1);
    ang.theta = m.theta_ang;
  }
}

struct SimPaths {
  std::string traj;
  std::string gains;
  std::string hover_gains;
  std::string arma;
};

sim::SimScenario build_scenario(sim::Mode mode, const cfg::RunConfig& c,
                                const SimPaths& paths, const State& x0) {
  sim::SimScenario s;
  s.mode = mode;
  s.x0 = x0;
  s.plant = c.plant;
  s.T_s = c.sim.T_s;
  s.h = c.sim.h;
  s.horizon = c.sim.horizon;
  s.fuzzy_cfg = c.fuzzy;
  s.traj = io::read_trajectory(paths.traj).traj;

  const auto need = [&](const std::string& path, const char* flag) {
    if (path.empty()) {
      throw std::invalid_argument(std::string("mode '") + sim::mode_name(mode) +
                                  "' needs " + flag);
    }
    return path;
  };
  switch (mode) {
    case sim::Mode::kOpenLoop:
      break;
    case sim::Mode::kLbfsf:
      s.sched = io::read_gain_schedule(need(paths.gains, "--gains")).sched;
      break;
    case sim::Mode::kLbfsfHover:
      s.hover_sched =
          io::read_gain_schedule(need(paths.hover_gains, "--hover-gains"))
              .sched;
      break;
    case sim::Mode::kArma: {
      const auto m = io::read_arma_model(need(paths.arma, "--arma"));
      arma_controllers_from_file(m, s.arma_pos, s.arma_ang);
      break;
    }
    case sim::Mode::kFuzzy: {
      const auto m = io::read_arma_model(need(paths.arma, "--arma"));
      arma_controllers_from_file(m, s.arma_pos, s.arma_ang);
      s.hover_sched =
          io::read_gain_schedule(need(paths.hover_gains, "--hover-gains"))
              .sched;
      break;
    }
  }
  return s;
}

double planar(const State& err) { return std::hypot(err[kR1], err[kR2]); }

double wrapped_psi(const State& err) {
  return std::abs(fuzzy::wrap_angle(err[kPsi]));
}

void print_metrics(const sim::Metrics& m) {
  std::cout << "rms err        r1=" << fmt(m.rms_err[kR1])
            << " r2=" << fmt(m.rms_err[kR2])
            << " psi=" << fmt(m.rms_err[kPsi]) << "\n";
  std::cout << "terminal err   pos=" << fmt(planar(m.terminal_err))
            << " psi=" << fmt(wrapped_psi(m.terminal_err)) << "\n";
  std::cout << "max input      uT=" << fmt(m.max_u[kUT])
            << " uR=" << fmt(m.max_u[kUR]) << "\n";
  std::cout << "settled        " << (m.settled ? "yes" : "no") << "\n";
}

int run_optimize(const std::string& config_path, const std::string& out) {
  const cfg::RunConfig c = load(config_path);

  trajopt::SolveInfo info;
  trajopt::OptimalTrajectory traj;
  std::string status = "converged";
  int code = 0;
  try {
    traj = trajopt::solve(c.problem, c.solver, &info);
  } catch (const trajopt::SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    traj = e.best();
    info = e.info();
    const bool infeasible =
        dynamic_cast<const trajopt::InfeasibleError*>(&e) != nullptr;
    status = infeasible ? "infeasible" : "stalled";
    code = infeasible ? 2 : 3;
  }

  io::write_trajectory(out, traj, c.solver.eq_tol, c.solver.stat_tol);
  const auto rep = trajopt::feasibility_report(traj, c.problem);
  std::cout << "T_star         " << fmt(traj.T_star) << " s over "
            << traj.num_knots() << " knots (dt=" << fmt(traj.dt) << ")\n";
  std::cout << "max defect     " << fmt(rep.max_defect) << "\n";
  std::cout << "bound viol     " << fmt(rep.max_bound_violation) << "\n";
  std::cout << "boundary err   x0=" << fmt(rep.x0_error)
            << " xf=" << fmt(rep.xf_error) << " uf=" << fmt(rep.uf_error)
            << "\n";
  std::cout << "solver         outer=" << info.outer_iters
            << " inner=" << info.inner_iters << " evals=" << info.evals
            << " penalty=" << fmt(info.penalty) << "\n";
  std::cout << "RESULT command=optimize status=" << status
            << " T_star=" << fmt(traj.T_star)
            << " objective=" << fmt(traj.objective)
            << " max_defect=" << fmt(rep.max_defect)
            << " bound_violation=" << fmt(rep.max_bound_violation)
            << " outer=" << info.outer_iters << " inner=" << info.inner_iters
            << " evals=" << info.evals << " out=" << out << "\n";
  return code;
}

int run_gains(const std::string& config_path, const std::string& traj_path,
              const std::string& out, bool hover) {
  const cfg::RunConfig c = load(config_path);
  lqr::GainSchedule sched;
  if (hover) {
    sched = lqr::hover_gain(c.plant, c.weights);
  } else {
    const auto tf = io::read_trajectory(traj_path);
    sched = lqr::linearize_schedule(tf.traj, c.weights, c.plant);
  }
  io::write_gain_schedule(out, sched, c.weights);
  std::cout << "RESULT command=gains records=" << sched.size()
            << " hover=" << (sched.hover ? 1 : 0) << " out=" << out << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& traj_path,
              const std::string& gains_path, const std::string& out,
              int runs_flag, std::int64_t seed_flag) {
  const cfg::RunConfig c = load(config_path);
  const int n_runs = runs_flag >= 0 ? runs_flag : c.arma.n_runs;
  const std::uint64_t seed =
      seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : c.arma.seed;

  const auto tf = io::read_trajectory(traj_path);
  const auto gf = io::read_gain_schedule(gains_path);
  if (gf.sched.hover) {
    throw std::invalid_argument("train needs the per-knot gain schedule");
  }

  const auto ds = arma::generate_training_data(
      tf.traj, gf.sched, n_runs, seed, c.arma.ic_halfwidth, c.sim.T_s,
      c.sim.horizon, c.arma.l_w, c.arma.position_emits_both, c.plant);
  const auto fr = arma::fit_theta(ds, c.arma.l_w, c.arma.ridge);

  io::ArmaModelFile m;
  m.l_w = c.arma.l_w;
  m.position_emits_both = c.arma.position_emits_both;
  m.n_runs = n_runs;
  m.seed = seed;
  m.ridge = c.arma.ridge;
  m.rows = fr.rows;
  m.theta_pos = fr.theta_pos;
  m.theta_ang = fr.theta_ang;
  m.rms_pos = fr.rms_pos;
  m.grad_pos = fr.grad_pos;
  m.rms_ang = fr.rms_ang;
  m.grad_ang = fr.grad_ang;
  io::write_arma_model(out, m);

  std::cout << "training rows  " << fr.rows << " from " << n_runs
            << " runs (excluded " << ds.excluded << ")\n";
  std::cout << "fit rms        pos=" << fmt(fr.rms_pos)
            << " ang=" << fmt(fr.rms_ang) << "\n";
  std::cout << "fit gradient   pos=" << fmt(fr.grad_pos)
            << " ang=" << fmt(fr.grad_ang) << "\n";
  std::cout << "RESULT command=train runs=" << n_runs << " seed=" << seed
            << " rows=" << fr.rows << " excluded=" << ds.excluded
            << " rms_pos=" << fmt(fr.rms_pos) << " rms_ang=" << fmt(fr.rms_ang)
            << " grad_pos=" << fmt(fr.grad_pos)
            << " grad_ang=" << fmt(fr.grad_ang) << " out=" << out << "\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& mode_str,
                 const SimPaths& paths, const std::string& ic,
                 const std::string& out) {
  const cfg::RunConfig c = load(config_path);
  sim::Mode mode;
  if (!sim::parse_mode(mode_str, mode)) {
    throw std::invalid_argument(
        "unknown mode '" + mode_str +
        "' (expected open-loop|lbfsf|lbfsf-hover|arma|fuzzy)");
  }
  const sim::SimScenario s = build_scenario(mode, c, paths, parse_ic(ic));
  const sim::SimResult r = sim::simulate(s);
  io::write_sim_log(out, r);

  print_metrics(r.m);
  std::cout << "RESULT command=simulate mode=" << mode_str
            << " t_star=" << fmt(r.t_star) << " rows=" << r.log.size()
            << " diverged=" << (r.diverged ? 1 : 0)
            << " settled=" << (r.m.settled ? 1 : 0)
            << " rms_pos=" << fmt(planar(r.m.rms_err))
            << " rms_psi=" << fmt(r.m.rms_err[kPsi])
            << " terminal_pos=" << fmt(planar(r.m.terminal_err))
            << " terminal_psi=" << fmt(wrapped_psi(r.m.terminal_err))
            << " max_uT=" << fmt(r.m.max_u[kUT])
            << " max_uR=" << fmt(r.m.max_u[kUR]) << " out=" << out << "\n";
  return 0;
}

int run_eval(const std::string& config_path, const std::string& modes_csv,
             const SimPaths& paths, const std::string& ic, int runs,
             std::int64_t seed_flag, double ic_halfwidth,
             const std::string& out) {
  const cfg::RunConfig c = load(config_path);
  const std::uint64_t seed =
      seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 1;

  std::vector<sim::Mode> modes;
  std::size_t start = 0;
  while (start <= modes_csv.size()) {
    const std::size_t pos = modes_csv.find(',', start);
    const std::string tok =
        modes_csv.substr(start, pos == std::string::npos ? std::string::npos
                                                         : pos - start);
    sim::Mode m;
    if (!sim::parse_mode(tok, m)) {
      throw std::invalid_argument("unknown mode '" + tok + "' in --modes");
    }
    modes.push_back(m);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }

  const State x0 = parse_ic(ic);
  std::string table;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-12s %5s %4s %13s %13s %13s %13s %8s\n",
                "mode", "runs", "div", "rms_pos", "rms_psi", "term_pos",
                "term_psi", "settled");
  table += buf;
  int diverged_total = 0;
  for (const sim::Mode mode : modes) {
    const sim::SimScenario s = build_scenario(mode, c, paths, x0);
    const sim::McSummary mc = sim::monte_carlo(s, runs, seed, ic_halfwidth);
    diverged_total += mc.diverged;
    std::snprintf(buf, sizeof(buf),
                  "%-12s %5d %4d %13.6g %13.6g %13.6g %13.6g %8s\n",
                  sim::mode_name(mode), mc.n_runs, mc.diverged,
                  planar(mc.mean.rms_err), mc.mean.rms_err[kPsi],
                  planar(mc.worst.terminal_err),
                  wrapped_psi(mc.worst.terminal_err),
                  mc.mean.settled ? "yes" : "no");
    table += buf;
  }
  std::cout << table;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw io::IoError(out + ": cannot open for writing");
    f << table;
    f.flush();
    if (!f) throw io::IoError(out + ": write failed");
  }
  std::cout << "RESULT command=eval modes=" << modes.size() << " runs=" << runs
            << " seed=" << seed << " ic_halfwidth=" << fmt(ic_halfwidth)
            << " diverged=" << diverged_total << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"minimum-time bicopter flip: trajectory optimization, "
               "tracking controllers, closed-loop simulation"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "config file (defaults built in)");

  std::string out, traj_path, gains_path, hover_path, arma_path, ic, mode_str;
  std::string modes_csv = "open-loop,lbfsf,lbfsf-hover,arma,fuzzy";
  bool hover = false;
  int trn_runs = -1;
  std::int64_t trn_seed = -1;
  int evl_runs = 1;
  std::int64_t evl_seed = 1;
  double ic_halfwidth = 0.0;

  auto* opt = app.add_subcommand("optimize", "solve the minimum-time flip");
  opt->add_option("--out", out, "trajectory file to write")->required();

  auto* gns = app.add_subcommand("gains", "LQR gains along a trajectory");
  gns->add_option("--traj", traj_path, "trajectory file");
  gns->add_option("--out", out, "gain-schedule file to write")->required();
  gns->add_flag("--hover", hover, "single gain at the hover condition");

  auto* trn = app.add_subcommand("train", "fit the ARMA controllers");
  trn->add_option("--traj", traj_path, "trajectory file")->required();
  trn->add_option("--gains", gains_path, "per-knot gain schedule")->required();
  trn->add_option("--out", out, "model file to write")->required();
  trn->add_option("--runs", trn_runs, "training runs (default from config)");
  trn->add_option("--seed", trn_seed, "training seed (default from config)");

  auto* simc = app.add_subcommand("simulate", "closed-loop rollout");
  simc->add_option("--mode", mode_str,
                   "open-loop|lbfsf|lbfsf-hover|arma|fuzzy")
      ->required();
  simc->add_option("--traj", traj_path, "trajectory file")->required();
  simc->add_option("--gains", gains_path, "per-knot gain schedule");
  simc->add_option("--hover-gains", hover_path, "hover gain file");
  simc->add_option("--arma", arma_path, "ARMA model file");
  simc->add_option("--ic", ic, "initial state, 6 csv values (default zeros)");
  simc->add_option("--out", out, "sim log to write")->required();

  auto* evl = app.add_subcommand("eval", "batch metrics per mode");
  evl->add_option("--modes", modes_csv, "comma-separated mode list");
  evl->add_option("--traj", traj_path, "trajectory file")->required();
  evl->add_option("--gains", gains_path, "per-knot gain schedule");
  evl->add_option("--hover-gains", hover_path, "hover gain file");
  evl->add_option("--arma", arma_path, "ARMA model file");
  evl->add_option("--ic", ic, "nominal initial state, 6 csv values");
  evl->add_option("--runs", evl_runs, "runs per mode");
  evl->add_option("--seed", evl_seed, "batch seed");
  evl->add_option("--ic-halfwidth", ic_halfwidth,
                  "uniform perturbation halfwidth around --ic");
  evl->add_option("--out", out, "summary table file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const SimPaths paths{traj_path, gains_path, hover_path, arma_path};
  try {
    if (app.got_subcommand(opt)) return run_optimize(config_path, out);
    if (app.got_subcommand(gns)) {
      if (!hover && traj_path.empty()) {
        throw std::invalid_argument("gains needs --traj (or --hover)");
      }
      return run_gains(config_path, traj_path, out, hover);
    }
    if (app.got_subcommand(trn)) {
      return run_train(config_path, traj_path, gains_path, out, trn_runs,
                       trn_seed);
    }
    if (app.got_subcommand(simc)) {
      return run_simulate(config_path, mode_str, paths, ic, out);
    }
    return run_eval(config_path, modes_csv, paths, ic, evl_runs, evl_seed,
                    ic_halfwidth, out);
  } catch (const trajopt::SolveError& e) {
    // run_optimize handles its own solver failures; anything else is usage.
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const arma::DegenerateData& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lqr::CareError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cfg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
