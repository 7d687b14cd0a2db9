#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "bicopter/dynamics.hpp"

namespace bicopter::fuzzy {

// Membership breakpoints for the scheduling variable gamma = |wrapped pitch|:
// below gamma_lo the hover LQR has full weight, above gamma_hi the ARMA
// controller does, with a linear crossfade in between.
struct FuzzyConfig {
  double gamma_lo = 20.0 * M_PI / 180.0;
  double gamma_hi = 60.0 * M_PI / 180.0;
};

inline void validate(const FuzzyConfig& cfg) {
  if (!(cfg.gamma_lo >= 0.0 && cfg.gamma_lo < cfg.gamma_hi &&
        cfg.gamma_hi <= M_PI)) {
    throw std::invalid_argument(
        "FuzzyConfig: need 0 <= gamma_lo < gamma_hi <= pi");
  }
}

// Principal value in [-pi, pi]; wrap(pi) = pi and wrap(-pi) = -pi are both
// acceptable since only |psi_wrap| is consumed downstream.
inline double wrap_angle(double psi) { return std::remainder(psi, 2.0 * M_PI); }

struct Memberships {
  double mu_arma = 0.0;
  double mu_lqr = 0.0;
};

// Complementary piecewise-linear pair: mu_arma + mu_lqr = 1 exactly.
inline Memberships memberships(double gamma, const FuzzyConfig& cfg) {
  if (!(gamma >= 0.0 && gamma <= M_PI)) {
    throw std::invalid_argument("memberships: gamma must lie in [0, pi]");
  }
  double mu_lqr;
  if (gamma <= cfg.gamma_lo) {
    mu_lqr = 1.0;
  } else if (gamma >= cfg.gamma_hi) {
    mu_lqr = 0.0;
  } else {
    mu_lqr = (cfg.gamma_hi - gamma) / (cfg.gamma_hi - cfg.gamma_lo);
  }
  return {1.0 - mu_lqr, mu_lqr};
}

class EmptyRuleBase : public std::domain_error {
 public:
  EmptyRuleBase() : std::domain_error("blend: both memberships are zero") {}
};

// Weighted mean of the two consequents. Unreachable with the complementary
// memberships above, but an all-zero rule base is still rejected explicitly.
inline Input blend(const Input& u_arma, const Input& u_lqr, double mu_arma,
                   double mu_lqr) {
  const double total = mu_arma + mu_lqr;
  if (!(total > 0.0)) throw EmptyRuleBase();
  return (mu_arma * u_arma + mu_lqr * u_lqr) / total;
}

}  // namespace bicopter::fuzzy
