// Acceptance harness: drives the CLI through the full pipeline twice and
// checks the nine shipping criteria, printing one PASS/FAIL line per
// criterion. Exit code is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <bicopter/arma.hpp>
#include <bicopter/dynamics.hpp>
#include <bicopter/fuzzy.hpp>
#include <bicopter/io.hpp>
#include <bicopter/lqr.hpp>
#include <bicopter/run_config.hpp>
#include <bicopter/sim.hpp>
#include <bicopter/trajopt.hpp>

#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace bicopter;

namespace {

constexpr char kFlipStartIc[] = "0.32,0.32,0.22,-0.35,0.16,0.02";

std::string g_cli;
fs::path g_work;
std::map<std::string, double> g_seconds;  // per pipeline step, dir 'a' only
std::vector<std::string> g_step_errors;

double planar(const State& e) { return std::hypot(e[kR1], e[kR2]); }

std::string num(double v, const char* fmt = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

// Runs one CLI step with output captured; records wall time under `label`.
bool step(const std::string& label, const std::string& args) {
  const std::string log = (g_work / (label + ".out")).string();
  const std::string cmd = "\"" + g_cli + "\" " + args + " > \"" + log +
                          "\" 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  const std::chrono::duration<double> dt =
      std::chrono::steady_clock::now() - t0;
  if (!g_seconds.count(label)) g_seconds[label] = dt.count();
  if (status != 0) {
    g_step_errors.push_back(label + " exited with status " +
                            std::to_string(status));
    return false;
  }
  return true;
}

bool run_pipeline(const std::string& dir, const std::string& tracking_ini) {
  const auto p = [&](const char* name) {
    return (g_work / dir / name).string();
  };
  fs::create_directories(g_work / dir);
  bool ok = true;
  ok &= step(dir + "_optimize", "optimize --out " + p("traj.csv"));
  ok &= step(dir + "_teacher_gains",
             "gains --traj " + p("traj.csv") + " --out " +
                 p("teacher_gains.csv"));
  ok &= step(dir + "_track_gains",
             "--config " + tracking_ini + " gains --traj " + p("traj.csv") +
                 " --out " + p("track_gains.csv"));
  ok &= step(dir + "_hover_gains",
             "--config " + tracking_ini + " gains --hover --out " +
                 p("hover_gains.csv"));
  ok &= step(dir + "_train",
             "train --traj " + p("traj.csv") + " --gains " +
                 p("teacher_gains.csv") + " --out " + p("arma.model"));
  ok &= step(dir + "_sim_open",
             "simulate --mode open-loop --traj " + p("traj.csv") + " --ic " +
                 kFlipStartIc + " --out " + p("sim_open.csv"));
  ok &= step(dir + "_sim_lbfsf",
             "simulate --mode lbfsf --traj " + p("traj.csv") + " --gains " +
                 p("track_gains.csv") + " --ic " + kFlipStartIc + " --out " +
                 p("sim_lbfsf.csv"));
  ok &= step(dir + "_sim_arma_nominal",
             "simulate --mode arma --traj " + p("traj.csv") + " --arma " +
                 p("arma.model") + " --out " + p("sim_arma_nominal.csv"));
  ok &= step(dir + "_sim_arma_offset",
             "simulate --mode arma --traj " + p("traj.csv") + " --arma " +
                 p("arma.model") + " --ic " + kFlipStartIc + " --out " +
                 p("sim_arma_offset.csv"));
  ok &= step(dir + "_sim_fuzzy",
             "simulate --mode fuzzy --traj " + p("traj.csv") + " --arma " +
                 p("arma.model") + " --hover-gains " + p("hover_gains.csv") +
                 " --ic " + kFlipStartIc + " --out " + p("sim_fuzzy.csv"));
  ok &= step(dir + "_eval",
             "eval --traj " + p("traj.csv") + " --gains " +
                 p("track_gains.csv") + " --hover-gains " +
                 p("hover_gains.csv") + " --arma " + p("arma.model") +
                 " --out " + p("eval.txt"));
  return ok;
}

std::string path_a(const char* name) { return (g_work / "a" / name).string(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

Verdict criterion_flip() {
  const io::TrajectoryFile tf = io::read_trajectory(path_a("traj.csv"));
  const cfg::RunConfig c = cfg::default_config();
  const auto rep = trajopt::feasibility_report(tf.traj, c.problem);
  const double secs = g_seconds.at("a_optimize");
  const bool pass = tf.traj.T_star >= 1.6278 * 0.95 &&
                    tf.traj.T_star <= 1.6278 * 1.05 &&
                    rep.max_defect <= 1e-6 && rep.worst() <= 1e-6 &&
                    secs <= 300.0;
  return {pass, "T*=" + num(tf.traj.T_star, "%.6f") +
                    " s, max defect=" + num(rep.max_defect) + ", bounds=" +
                    num(rep.max_bound_violation) + ", " + num(secs) + " s"};
}

Verdict criterion_bang_bang() {
  const auto t0 = std::chrono::steady_clock::now();
  const trajopt::OptimalTrajectory traj =
      trajopt::solve(testutil::di_problem(200), testutil::tuned_options());
  const std::chrono::duration<double> dt =
      std::chrono::steady_clock::now() - t0;
  int off_bang = 0;
  for (int k = 0; k < 200; ++k) {
    const double u = traj.us(0, k);
    if (std::min(std::abs(u - 1.0), std::abs(u + 1.0)) > 0.05) ++off_bang;
  }
  const bool pass = traj.T_star >= 1.95 && traj.T_star <= 2.05 &&
                    off_bang <= 5 && dt.count() <= 10.0;
  return {pass, "T=" + num(traj.T_star, "%.4f") + ", off-bang knots=" +
                    std::to_string(off_bang) + ", " + num(dt.count()) + " s"};
}

Verdict criterion_open_loop() {
  const sim::SimResult r = io::read_sim_log(path_a("sim_open.csv"));
  const auto& last = r.log.back();
  const double err = std::hypot(last.x[kR1] - last.x_ref[kR1],
                                last.x[kR2] - last.x_ref[kR2]);
  const double secs = g_seconds.at("a_sim_open");
  const bool pass = last.t >= 3.0 - 1e-9 && err >= 0.5 && secs <= 1.0;
  return {pass, "planar error at 3 s=" + num(err) + " m, " + num(secs) + " s"};
}

Verdict criterion_lbfsf() {
  const sim::SimResult r = io::read_sim_log(path_a("sim_lbfsf.csv"));
  const double term_pos = planar(r.m.terminal_err);
  const double term_psi = std::abs(fuzzy::wrap_angle(r.m.terminal_err[kPsi]));
  const double rms_pos = planar(r.m.rms_err);
  const bool pass = !r.diverged && term_pos <= 0.05 && term_psi <= 0.05 &&
                    rms_pos <= 0.2;
  return {pass, "terminal pos=" + num(term_pos) + " m, psi=" + num(term_psi) +
                    " rad, rms pos=" + num(rms_pos) + " m"};
}

Verdict criterion_arma() {
  const sim::SimResult r = io::read_sim_log(path_a("sim_arma_nominal.csv"));
  const double rms_pos = planar(r.m.rms_err);

  const io::ArmaModelFile m = io::read_arma_model(path_a("arma.model"));
  const double grad = std::max(m.grad_pos, m.grad_ang);

  // Planted recovery: noiseless targets from a known coefficient matrix must
  // come back through fit_theta essentially unchanged.
  const int l_w = 5;
  std::mt19937_64 eng(314159);
  auto fill = [&](Eigen::MatrixXd& m_out, long rows, long cols) {
    m_out.resize(rows, cols);
    for (long i = 0; i < rows; ++i) {
      for (long j = 0; j < cols; ++j) {
        m_out(i, j) = testutil::urand(eng, -1.0, 1.0);
      }
    }
  };
  Eigen::MatrixXd theta_pos, theta_ang;
  fill(theta_pos, arma::regressor_length(l_w, 1, 2), 1);
  fill(theta_ang, arma::regressor_length(l_w, 1, 1), 1);
  arma::TrainingDataset ds;
  ds.n_runs = 2;
  ds.l_w = l_w;
  for (int run = 0; run < 2; ++run) {
    arma::TrainingRun tr;
    fill(tr.phi_pos, 200, theta_pos.rows());
    fill(tr.phi_ang, 200, theta_ang.rows());
    tr.tgt_pos = tr.phi_pos * theta_pos;
    tr.tgt_ang = tr.phi_ang * theta_ang;
    ds.runs.push_back(tr);
  }
  const arma::FitResult fr = arma::fit_theta(ds, l_w, 1e-10);
  const double recovery =
      std::max((fr.theta_pos - theta_pos).cwiseAbs().maxCoeff(),
               (fr.theta_ang - theta_ang).cwiseAbs().maxCoeff());

  const bool pass = !r.diverged && rms_pos <= 0.3 && grad <= 1e-8 &&
                    recovery <= 1e-6;
  return {pass, "rms pos=" + num(rms_pos) + " m, fit gradient=" + num(grad) +
                    ", planted recovery=" + num(recovery)};
}

Verdict criterion_fuzzy() {
  const sim::SimResult rf = io::read_sim_log(path_a("sim_fuzzy.csv"));
  const sim::SimResult ra = io::read_sim_log(path_a("sim_arma_offset.csv"));
  double worst_pos = 0.0, worst_psi = 0.0;
  for (const auto& row : rf.log) {
    if (row.t < rf.t_star + 1.0) continue;
    worst_pos = std::max(worst_pos, std::hypot(row.x[kR1] - row.x_ref[kR1],
                                               row.x[kR2] - row.x_ref[kR2]));
    worst_psi = std::max(
        worst_psi, std::abs(fuzzy::wrap_angle(row.x[kPsi] - row.x_ref[kPsi])));
  }
  const double term_fuzzy = planar(rf.m.terminal_err);
  const double term_arma = planar(ra.m.terminal_err);
  const bool pass = !rf.diverged && worst_pos <= 0.1 && worst_psi <= 0.1 &&
                    term_fuzzy <= term_arma;
  return {pass, "tail pos<=" + num(worst_pos) + " m, psi<=" + num(worst_psi) +
                    " rad, terminal " + num(term_fuzzy) + " vs ARMA " +
                    num(term_arma)};
}

Verdict criterion_care() {
  using Eigen::MatrixXd;
  int solved = 0;
  double worst_res = 0.0;
  bool hurwitz = true;

  std::mt19937_64 eng(2024);
  for (int i = 0; i < 100; ++i) {
    const int n = 2 + static_cast<int>(eng() % 5);
    const int m = 1 + static_cast<int>(eng() % 3);
    MatrixXd A(n, n), B(n, m);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) A(r, c) = testutil::urand(eng, -1.0, 1.0);
      for (int c = 0; c < m; ++c) B(r, c) = testutil::urand(eng, -1.0, 1.0);
    }
    const MatrixXd Q = MatrixXd::Identity(n, n);
    const MatrixXd R = MatrixXd::Identity(m, m);
    const MatrixXd P = lqr::solve_care(A, B, Q, R);
    worst_res = std::max(worst_res, lqr::care_residual(A, B, Q, R, P));
    const MatrixXd K = R.ldlt().solve(B.transpose() * P);
    hurwitz = hurwitz && lqr::is_hurwitz(A - B * K);
    ++solved;
  }

  // The hover point and every knot of the shipped trajectory, under both
  // weight choices the pipeline uses.
  const io::TrajectoryFile tf = io::read_trajectory(path_a("traj.csv"));
  const lqr::LqrWeights track =
      io::read_gain_schedule(path_a("track_gains.csv")).weights;
  int knots = 0;
  for (const lqr::LqrWeights& w : {lqr::LqrWeights{}, track}) {
    for (const lqr::GainSchedule& sched :
         {lqr::linearize_schedule(tf.traj, w), lqr::hover_gain({}, w)}) {
      for (int k = 0; k < sched.size(); ++k) {
        const MatrixXd P = lqr::solve_care(sched.A[k], sched.B[k], w.R1, w.R2);
        worst_res = std::max(
            worst_res, lqr::care_residual(sched.A[k], sched.B[k], w.R1, w.R2, P));
        hurwitz = hurwitz &&
                  lqr::is_hurwitz(sched.A[k] - sched.B[k] * sched.K[k]);
        ++knots;
      }
    }
  }

  const bool pass = solved == 100 && knots == 2 * (tf.traj.num_knots() + 1) &&
                    worst_res <= 1e-8 && hurwitz;
  return {pass, std::to_string(solved) + " random + " + std::to_string(knots) +
                    " scheduled solves, worst residual=" + num(worst_res) +
                    ", Hurwitz=" + (hurwitz ? "yes" : "no")};
}

Verdict criterion_jacobians() {
  const PlantParams p;
  std::mt19937_64 eng(7);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    State x;
    for (int j = 0; j < kStateDim; ++j) x[j] = testutil::urand(eng, -3.0, 3.0);
    Input u(testutil::urand(eng, 1.0, 20.0), testutil::urand(eng, -15.0, 15.0));

    StateJacobian A;
    InputJacobian B;
    jacobians(x, u, p, A, B);

    const double step = 1e-6;
    for (int j = 0; j < kStateDim; ++j) {
      State xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      const State col = (deriv(xp, u, p) - deriv(xm, u, p)) / (2.0 * step);
      worst = std::max(worst, (col - A.col(j)).cwiseAbs().maxCoeff());
    }
    for (int j = 0; j < kInputDim; ++j) {
      Input up = u, um = u;
      up[j] += step;
      um[j] -= step;
      const State col = (deriv(x, up, p) - deriv(x, um, p)) / (2.0 * step);
      worst = std::max(worst, (col - B.col(j)).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-6, "worst deviation=" + num(worst) + " over 100 points"};
}

Verdict criterion_determinism(const std::string& tracking_ini) {
  if (!run_pipeline("b", tracking_ini)) {
    return {false, "repeat pipeline failed: " + g_step_errors.back()};
  }
  const char* files[] = {"traj.csv",      "teacher_gains.csv",
                         "track_gains.csv", "hover_gains.csv",
                         "arma.model",    "sim_open.csv",
                         "sim_lbfsf.csv", "sim_arma_nominal.csv",
                         "sim_arma_offset.csv", "sim_fuzzy.csv",
                         "eval.txt"};
  int same = 0;
  std::string first_diff;
  for (const char* f : files) {
    std::ifstream a(g_work / "a" / f, std::ios::binary);
    std::ifstream b(g_work / "b" / f, std::ios::binary);
    std::ostringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    if (a && b && sa.str() == sb.str()) {
      ++same;
    } else if (first_diff.empty()) {
      first_diff = f;
    }
  }
  const bool pass = same == 11;
  return {pass, std::to_string(same) + "/11 files byte-identical" +
                    (pass ? "" : ", first difference: " + first_diff)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <cli-binary>\n", argv[0]);
    return 64;
  }
  g_cli = argv[1];
  g_work = fs::temp_directory_path() / "bicopter_acceptance";
  std::error_code ec;
  fs::remove_all(g_work, ec);
  fs::create_directories(g_work);

  // Tracking weights for the flip-following controllers; the identity
  // defaults stay in force for the optimizer and the training teacher.
  const std::string tracking_ini = (g_work / "tracking.ini").string();
  {
    std::ofstream f(tracking_ini);
    f << "[lqr]\n"
      << "R1 = 10000, 0, 0, 0, 0, 0,"
      << "     0, 400, 0, 0, 0, 0,"
      << "     0, 0, 10000, 0, 0, 0,"
      << "     0, 0, 0, 400, 0, 0,"
      << "     0, 0, 0, 0, 600, 0,"
      << "     0, 0, 0, 0, 0, 60\n"
      << "R2 = 1\n";
  }

  const bool pipeline_ok = run_pipeline("a", tracking_ini);
  if (!pipeline_ok) {
    for (const auto& e : g_step_errors) {
      std::fprintf(stderr, "pipeline: %s\n", e.c_str());
    }
  }

  struct Criterion {
    const char* name;
    std::function<Verdict()> eval;
  };
  const Criterion criteria[] = {
      {"minimum-time flip", criterion_flip},
      {"double-integrator bang-bang", criterion_bang_bang},
      {"open-loop divergence", criterion_open_loop},
      {"scheduled-feedback tracking", criterion_lbfsf},
      {"trained controller behavior", criterion_arma},
      {"fuzzy blend superiority", criterion_fuzzy},
      {"Riccati solves", criterion_care},
      {"analytic Jacobians", criterion_jacobians},
      {"pipeline determinism",
       [&] { return criterion_determinism(tracking_ini); }},
  };

  int failures = 0;
  for (int i = 0; i < 9; ++i) {
    Verdict v;
    try {
      v = criteria[i].eval();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::printf("%s criterion %d: %s (%s)\n", v.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
