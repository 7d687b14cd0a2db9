#include "bicopter/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bicopter::sim {

namespace {

using Eigen::VectorXd;

long checked_multiple(double whole, double part, const char* what) {
  const long n = std::lround(whole / part);
  if (n < 1 || std::abs(n * part - whole) > 1e-9 * whole) {
    throw std::invalid_argument(std::string("simulate: ") + what);
  }
  return n;
}

// Decoupled ARMA feedback: position controller consumes [e_r1, e_r2]; the
// angle controller consumes the unwrapped e_psi unless the position
// controller emits both channels itself.
Input arma_feedback(arma::ArmaController& pos, arma::ArmaController& ang,
                    const State& x, const State& x_ref) {
  VectorXd y_pos(2);
  y_pos << x[kR1] - x_ref[kR1], x[kR2] - x_ref[kR2];
  const VectorXd u_pos = arma::arma_step(pos, y_pos);
  if (pos.n_u == 2) return Input(u_pos[0], u_pos[1]);
  VectorXd y_ang(1);
  y_ang << x[kPsi] - x_ref[kPsi];
  const VectorXd u_ang = arma::arma_step(ang, y_ang);
  return Input(u_pos[0], u_ang[0]);
}

void check_scenario(const SimScenario& s) {
  if (!(s.T_s > 0.0) || !(s.h > 0.0) || !(s.horizon > 0.0)) {
    throw std::invalid_argument("simulate: T_s, h, horizon must be positive");
  }
  if (s.traj.num_knots() < 2 || !(s.traj.dt > 0.0)) {
    throw std::invalid_argument("simulate: scenario needs a trajectory");
  }
  if (s.horizon < s.traj.T_star) {
    throw std::invalid_argument("simulate: horizon shorter than the maneuver");
  }
  switch (s.mode) {
    case Mode::kOpenLoop:
      break;
    case Mode::kLbfsf:
      if (s.sched.hover || s.sched.size() != s.traj.num_knots()) {
        throw std::invalid_argument(
            "simulate: lbfsf needs a gain per trajectory knot");
      }
      break;
    case Mode::kLbfsfHover:
      if (s.hover_sched.size() != 1) {
        throw std::invalid_argument("simulate: lbfsf-hover needs a hover gain");
      }
      break;
    case Mode::kArma:
    case Mode::kFuzzy: {
      const auto& p = s.arma_pos;
      const bool pos_ok =
          p.n_y == 2 && (p.n_u == 1 || p.n_u == 2) &&
          p.theta.rows() == arma::regressor_length(p.l_w, p.n_u, p.n_y) &&
          p.theta.cols() == p.n_u;
      const auto& a = s.arma_ang;
      const bool ang_ok =
          p.n_u == 2 ||
          (a.n_y == 1 && a.n_u == 1 &&
           a.theta.rows() == arma::regressor_length(a.l_w, 1, 1) &&
           a.theta.cols() == 1);
      if (!pos_ok || !ang_ok) {
        throw std::invalid_argument("simulate: ARMA controllers misconfigured");
      }
      if (s.mode == Mode::kFuzzy) {
        fuzzy::validate(s.fuzzy_cfg);
        if (s.hover_sched.size() != 1) {
          throw std::invalid_argument("simulate: fuzzy needs a hover gain");
        }
      }
      break;
    }
  }
}

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::kOpenLoop: return "open-loop";
    case Mode::kLbfsf: return "lbfsf";
    case Mode::kLbfsfHover: return "lbfsf-hover";
    case Mode::kArma: return "arma";
    case Mode::kFuzzy: return "fuzzy";
  }
  return "?";
}

bool parse_mode(const std::string& name, Mode& mode) {
  for (Mode m : {Mode::kOpenLoop, Mode::kLbfsf, Mode::kLbfsfHover, Mode::kArma,
                 Mode::kFuzzy}) {
    if (name == mode_name(m)) {
      mode = m;
      return true;
    }
  }
  return false;
}

std::pair<State, Input> reference_at(double t,
                                     const trajopt::OptimalTrajectory& traj) {
  const int k = traj.knot_index(t);
  return {State(traj.xs.col(k)), Input(traj.us.col(k))};
}

SimResult simulate(const SimScenario& s) {
  check_scenario(s);
  const long substeps = checked_multiple(
      s.T_s, s.h, "T_s must be an integer multiple of h");
  const long ticks = checked_multiple(
      s.horizon, s.T_s, "horizon must be an integer multiple of T_s");

  arma::ArmaController pos = s.arma_pos;
  arma::ArmaController ang = s.arma_ang;
  if (s.mode == Mode::kArma || s.mode == Mode::kFuzzy) {
    arma::reset(pos);
    if (pos.n_u == 1) arma::reset(ang);
  }

  SimResult r;
  r.t_star = s.traj.T_star;
  r.log.reserve(ticks + 1);

  State x = s.x0;
  for (long k = 0; k <= ticks; ++k) {
    const double t = k * s.T_s;
    auto [x_ref, u_ref] = reference_at(t, s.traj);

    Input u_fb = Input::Zero();
    double mu_arma = 0.0;
    double mu_lqr = 0.0;
    switch (s.mode) {
      case Mode::kOpenLoop:
        break;
      case Mode::kLbfsf:
        u_fb = lqr::lbfsf_control(t, x, s.traj, s.sched);
        break;
      case Mode::kLbfsfHover:
        u_fb = lqr::lbfsf_control(t, x, s.traj, s.hover_sched);
        break;
      case Mode::kArma:
        u_fb = arma_feedback(pos, ang, x, x_ref);
        break;
      case Mode::kFuzzy: {
        // Both constituents run every tick so the ARMA histories stay warm
        // even while its membership is zero.
        const Input u_arma = arma_feedback(pos, ang, x, x_ref);
        const Input u_lqr = lqr::lbfsf_control(t, x, s.traj, s.hover_sched);
        const double gamma = std::abs(fuzzy::wrap_angle(x[kPsi]));
        const auto mu = fuzzy::memberships(gamma, s.fuzzy_cfg);
        mu_arma = mu.mu_arma;
        mu_lqr = mu.mu_lqr;
        u_fb = fuzzy::blend(u_arma, u_lqr, mu_arma, mu_lqr);
        break;
      }
    }
    const Input u_total = u_ref + u_fb;
    r.log.push_back({t, x, x_ref, u_ref, u_fb, u_total, mu_arma, mu_lqr});
    if (k == ticks) break;

    bool blown = false;
    for (long sub = 0; sub < substeps; ++sub) {
      x = rk4_step(x, u_total, s.h, s.plant);
      if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e6) {
        blown = true;
        break;
      }
    }
    if (blown) {
      r.diverged = true;
      break;
    }
  }

  r.m = metrics(r);
  return r;
}

Metrics metrics(const SimResult& r) {
  Metrics m;
  m.diverged = r.diverged;
  if (r.log.empty()) return m;

  State sq = State::Zero();
  long count = 0;
  const double t_end = r.t_star * (1.0 + 1e-12) + 1e-12;
  for (const auto& row : r.log) {
    const State err = row.x - row.x_ref;
    if (row.t <= t_end) {
      sq += err.cwiseProduct(err);
      ++count;
    }
    m.max_u = m.max_u.cwiseMax(row.u_total.cwiseAbs());
  }
  if (count > 0) m.rms_err = (sq / count).cwiseSqrt();

  const auto& last = r.log.back();
  m.terminal_err = (last.x - last.x_ref).cwiseAbs();

  if (!r.diverged) {
    m.settled = true;
    const double window_start = 0.9 * last.t;
    for (const auto& row : r.log) {
      if (row.t < window_start) continue;
      const double planar = std::hypot(row.x[kR1] - row.x_ref[kR1],
                                       row.x[kR2] - row.x_ref[kR2]);
      const double angular =
          std::abs(fuzzy::wrap_angle(row.x[kPsi] - row.x_ref[kPsi]));
      if (planar > 0.05 || angular > 0.05) {
        m.settled = false;
        break;
      }
    }
  }
  return m;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (run + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

McSummary monte_carlo(const SimScenario& nominal, int n_runs,
                      std::uint64_t seed, double ic_halfwidth) {
  if (n_runs < 1) throw std::invalid_argument("monte_carlo: n_runs must be >= 1");
  if (ic_halfwidth < 0.0) {
    throw std::invalid_argument("monte_carlo: ic_halfwidth must be >= 0");
  }

  McSummary summary;
  summary.n_runs = n_runs;
  summary.runs.reserve(n_runs);

  State mean_rms = State::Zero(), mean_term = State::Zero();
  Input mean_u = Input::Zero();
  int completed = 0;
  bool all_settled = true;

  for (int run = 0; run < n_runs; ++run) {
    std::mt19937_64 eng(derive_seed(seed, run));
    SimScenario sc = nominal;
    for (int i = 0; i < kStateDim; ++i) {
      sc.x0[i] = nominal.x0[i] + ic_halfwidth * (2.0 * uniform01(eng) - 1.0);
    }
    sc.seed = derive_seed(seed, run);
    const SimResult res = simulate(sc);
    summary.runs.push_back(res.m);
    if (res.diverged) {
      ++summary.diverged;
      continue;
    }
    ++completed;
    mean_rms += res.m.rms_err;
    mean_term += res.m.terminal_err;
    mean_u += res.m.max_u;
    all_settled = all_settled && res.m.settled;
    summary.worst.rms_err = summary.worst.rms_err.cwiseMax(res.m.rms_err);
    summary.worst.terminal_err =
        summary.worst.terminal_err.cwiseMax(res.m.terminal_err);
    summary.worst.max_u = summary.worst.max_u.cwiseMax(res.m.max_u);
  }

  if (completed > 0) {
    summary.mean.rms_err = mean_rms / completed;
    summary.mean.terminal_err = mean_term / completed;
    summary.mean.max_u = mean_u / completed;
    summary.mean.settled = all_settled;
    summary.worst.settled = all_settled;
  }
  summary.mean.diverged = summary.diverged > 0;
  summary.worst.diverged = summary.diverged > 0;
  return summary;
}

}  // namespace bicopter::sim
