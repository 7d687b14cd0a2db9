#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <bicopter/dynamics.hpp>
#include <bicopter/fuzzy.hpp>
#include <bicopter/lqr.hpp>
#include <bicopter/trajopt.hpp>

namespace bicopter::cfg {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ArmaTrainConfig {
  int n_runs = 100;
  int l_w = 5;
  double ridge = 1e-6;
  std::uint64_t seed = 1;
  // Training-run initial conditions are drawn from [-ic_halfwidth,
  // +ic_halfwidth] per component. 0.2 keeps the cloned controller inside the
  // regime where its closed loop stays useful at both the nominal and the
  // perturbed-start scales; much wider and the fit chases transients it
  // cannot reproduce, much narrower and the flip-scale behavior is
  // unrepresented.
  double ic_halfwidth = 0.2;
  bool position_emits_both = false;
};

struct SimConfig {
  double T_s = 1e-3;
  double h = 1e-4;
  double horizon = 3.0;
};

struct RunConfig {
  PlantParams plant;
  trajopt::TrajOptProblem problem;
  trajopt::SolverOptions solver;
  lqr::LqrWeights weights;
  ArmaTrainConfig arma;
  fuzzy::FuzzyConfig fuzzy;
  SimConfig sim;
};

// Flip setup: x_f = [0,0,3,0,2pi,0], u_f = hover, uT in [1,20], uR in
// [-15,15], r1 in [-1,1], r2 in [0,3], N = 400, Q_x = Q_u = 100*I,
// T_init = 10, plus solver caps sized for the N = 400 transcription.
RunConfig default_config();

// INI-style text: `[section]` headers, `key = value` lines, `#`/`;` comment
// lines. Unknown sections or keys are rejected with the offending name and
// line; a repeated key keeps its last value. Matrix-valued keys accept either
// a single scalar (times identity) or the full row-major entry list. Angle
// breakpoints accept radians (gamma_lo) or degrees (gamma_lo_deg).
RunConfig load_config(const std::string& path);

// Bound/positivity checks for every field; throws ConfigError.
void validate(const RunConfig& c);

}  // namespace bicopter::cfg
