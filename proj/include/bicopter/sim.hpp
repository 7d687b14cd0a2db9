#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bicopter/arma.hpp"
#include "bicopter/dynamics.hpp"
#include "bicopter/fuzzy.hpp"
#include "bicopter/lqr.hpp"
#include "bicopter/trajopt.hpp"

namespace bicopter::sim {

enum class Mode { kOpenLoop, kLbfsf, kLbfsfHover, kArma, kFuzzy };

// CLI/file spellings: open-loop, lbfsf, lbfsf-hover, arma, fuzzy.
const char* mode_name(Mode mode);
bool parse_mode(const std::string& name, Mode& mode);

struct SimScenario {
  Mode mode = Mode::kOpenLoop;
  State x0 = State::Zero();
  trajopt::OptimalTrajectory traj;  // reference for every mode
  lqr::GainSchedule sched;          // lbfsf
  lqr::GainSchedule hover_sched;    // lbfsf_hover and the fuzzy LQR branch
  arma::ArmaController arma_pos;    // arma and fuzzy (histories reset per run)
  arma::ArmaController arma_ang;
  fuzzy::FuzzyConfig fuzzy_cfg;
  PlantParams plant;
  double T_s = 1e-3;     // controller period; must be an integer multiple of h
  double h = 1e-4;       // plant integration step
  double horizon = 3.0;  // total simulated time, >= traj.T_star
  std::uint64_t seed = 0;  // batch bookkeeping; simulate() draws nothing
};

// One controller-rate sample. x is the plant state at t, u_total = u_ref +
// u_fb is the input held over [t, t + T_s).
struct LogRow {
  double t = 0.0;
  State x = State::Zero();
  State x_ref = State::Zero();
  Input u_ref = Input::Zero();
  Input u_fb = Input::Zero();
  Input u_total = Input::Zero();
  double mu_arma = 0.0;  // zeros outside fuzzy mode
  double mu_lqr = 0.0;
};

struct Metrics {
  State rms_err = State::Zero();       // per channel over [0, T_star]
  State terminal_err = State::Zero();  // |x - x_ref| at the last logged tick
  Input max_u = Input::Zero();         // per channel max |u_total|
  // Over the final 10% of the logged span: planar position error <= 0.05 m
  // and wrapped angle error <= 0.05 rad at every tick.
  bool settled = false;
  bool diverged = false;
};

struct SimResult {
  std::vector<LogRow> log;  // horizon/T_s + 1 rows, fewer when diverged
  bool diverged = false;
  double t_star = 0.0;  // maneuver end, copied from the scenario trajectory
  Metrics m;
};

// Zero-order-hold reference: knot floor(t/dt) before T_star, the final knot
// (terminal state and hover input) afterwards.
std::pair<State, Input> reference_at(double t,
                                     const trajopt::OptimalTrajectory& traj);

// Deterministic closed- or open-loop rollout: plant integrated with RK4 at
// step h, controller refreshed every T_s and held. Aborts with a partial log
// once any |state component| exceeds 1e6.
SimResult simulate(const SimScenario& s);

// Pure recomputation from the log (also stored as SimResult::m).
Metrics metrics(const SimResult& r);

struct McSummary {
  std::vector<Metrics> runs;  // per run, in run order
  // Componentwise mean/max over completed (non-diverged) runs; their settled
  // flag is true only when every completed run settled, and their diverged
  // flag is set when any run diverged.
  Metrics mean;
  Metrics worst;
  int n_runs = 0;
  int diverged = 0;
};

// Independent runs from x0 = nominal.x0 + componentwise uniform draws on
// [-ic_halfwidth, ic_halfwidth]; run r uses its own engine seeded with
// derive_seed(seed, r). Aggregation order is fixed, so results are
// reproducible for a given seed.
McSummary monte_carlo(const SimScenario& nominal, int n_runs,
                      std::uint64_t seed, double ic_halfwidth);

// splitmix64 of (base, run): decorrelated per-run streams, platform-stable.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t run);

// 53-bit uniform in [0, 1) from the raw engine output; avoids libstdc++/libc++
// differences in std::uniform_real_distribution.
double uniform01(std::mt19937_64& eng);

}  // namespace bicopter::sim
