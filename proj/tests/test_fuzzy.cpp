#include <doctest.h>

#include <cmath>
#include <random>

#include "bicopter/fuzzy.hpp"
#include "helpers.hpp"

using namespace bicopter;
using testutil::kPi;

TEST_CASE("wrap_angle principal values") {
  CHECK(fuzzy::wrap_angle(0.0) == 0.0);
  CHECK(std::abs(fuzzy::wrap_angle(2.0 * kPi)) <= 1e-15);
  CHECK(fuzzy::wrap_angle(3.0 * kPi / 2.0) ==
        doctest::Approx(-kPi / 2.0).epsilon(1e-15));
  CHECK(fuzzy::wrap_angle(0.3) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(fuzzy::wrap_angle(-0.3) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(std::abs(fuzzy::wrap_angle(7.0 * kPi)) ==
        doctest::Approx(kPi).epsilon(1e-12));
  CHECK(std::abs(fuzzy::wrap_angle(kPi)) == doctest::Approx(kPi));
  CHECK(std::abs(fuzzy::wrap_angle(-kPi)) == doctest::Approx(kPi));
  for (double psi : {-9.7, -4.0, 1.3, 6.4, 25.0}) {
    const double w = fuzzy::wrap_angle(psi);
    CHECK(w >= -kPi);
    CHECK(w <= kPi);
    CHECK(std::abs(std::sin(w) - std::sin(psi)) <= 1e-12);
    CHECK(std::abs(std::cos(w) - std::cos(psi)) <= 1e-12);
  }
}

TEST_CASE("abs wrap is continuous across the branch cut") {
  // |wrap| is continuous everywhere including odd multiples of pi.
  const double h = 1e-6;
  for (double center : {kPi, -kPi, 3.0 * kPi, 0.0, 2.0 * kPi}) {
    for (double t = center - 10 * h; t <= center + 10 * h; t += h) {
      const double a = std::abs(fuzzy::wrap_angle(t));
      const double b = std::abs(fuzzy::wrap_angle(t + h));
      CHECK(std::abs(a - b) <= 2.0 * h);
    }
  }
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(fuzzy::validate(fuzzy::FuzzyConfig{}));
  fuzzy::FuzzyConfig c;
  c.gamma_lo = -0.1;
  CHECK_THROWS_AS(fuzzy::validate(c), std::invalid_argument);
  c = {};
  c.gamma_lo = c.gamma_hi;
  CHECK_THROWS_AS(fuzzy::validate(c), std::invalid_argument);
  c = {};
  c.gamma_hi = kPi + 0.1;
  CHECK_THROWS_AS(fuzzy::validate(c), std::invalid_argument);
  c = {};
  c.gamma_lo = 0.0;
  c.gamma_hi = kPi;
  CHECK_NOTHROW(fuzzy::validate(c));
}

TEST_CASE("memberships breakpoints and ramp") {
  const fuzzy::FuzzyConfig cfg;
  auto m0 = fuzzy::memberships(0.0, cfg);
  CHECK(m0.mu_arma == 0.0);
  CHECK(m0.mu_lqr == 1.0);

  auto mpi = fuzzy::memberships(kPi, cfg);
  CHECK(mpi.mu_arma == 1.0);
  CHECK(mpi.mu_lqr == 0.0);

  auto mlo = fuzzy::memberships(cfg.gamma_lo, cfg);
  CHECK(mlo.mu_lqr == 1.0);
  auto mhi = fuzzy::memberships(cfg.gamma_hi, cfg);
  CHECK(mhi.mu_lqr == 0.0);

  auto mid = fuzzy::memberships(0.5 * (cfg.gamma_lo + cfg.gamma_hi), cfg);
  CHECK(mid.mu_arma == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mid.mu_lqr == doctest::Approx(0.5).epsilon(1e-12));

  // Quarter of the way up the ramp.
  const double g = cfg.gamma_lo + 0.25 * (cfg.gamma_hi - cfg.gamma_lo);
  auto mq = fuzzy::memberships(g, cfg);
  CHECK(mq.mu_lqr == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("memberships partition of unity") {
  const fuzzy::FuzzyConfig cfg;
  for (int i = 0; i <= 1000; ++i) {
    const double gamma = kPi * i / 1000.0;
    const auto m = fuzzy::memberships(gamma, cfg);
    CHECK(m.mu_arma >= 0.0);
    CHECK(m.mu_arma <= 1.0);
    CHECK(m.mu_lqr >= 0.0);
    CHECK(m.mu_lqr <= 1.0);
    CHECK(m.mu_arma + m.mu_lqr == 1.0);
  }
}

TEST_CASE("memberships rejects out-of-range gamma") {
  const fuzzy::FuzzyConfig cfg;
  CHECK_THROWS_AS(fuzzy::memberships(-1e-9, cfg), std::invalid_argument);
  CHECK_THROWS_AS(fuzzy::memberships(kPi + 1e-9, cfg), std::invalid_argument);
  CHECK_THROWS_AS(fuzzy::memberships(std::nan(""), cfg),
                  std::invalid_argument);
}

TEST_CASE("blend pure and mean cases") {
  const Input ua(3.0, -1.0);
  const Input ul(1.0, 5.0);
  CHECK((fuzzy::blend(ua, ul, 0.0, 1.0) - ul).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fuzzy::blend(ua, ul, 1.0, 0.0) - ua).cwiseAbs().maxCoeff() == 0.0);

  const Input mean = fuzzy::blend(ua, ul, 0.5, 0.5);
  CHECK(mean[kUT] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(mean[kUR] == doctest::Approx(2.0).epsilon(1e-15));

  // Equal consequents pass through for any valid memberships.
  const Input u(7.5, -0.25);
  for (double mu : {0.1, 0.5, 0.9}) {
    const Input out = fuzzy::blend(u, u, mu, 1.0 - mu);
    CHECK(std::abs(out[kUT] - u[kUT]) <= 1e-15);
    CHECK(std::abs(out[kUR] - u[kUR]) <= 1e-15);
  }
}

TEST_CASE("blend convexity and scale equivariance") {
  std::mt19937_64 eng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Input ua(testutil::urand(eng, -10.0, 10.0),
                   testutil::urand(eng, -10.0, 10.0));
    const Input ul(testutil::urand(eng, -10.0, 10.0),
                   testutil::urand(eng, -10.0, 10.0));
    const double mu = testutil::urand(eng, 0.0, 1.0);
    const Input out = fuzzy::blend(ua, ul, mu, 1.0 - mu);
    for (int i = 0; i < kInputDim; ++i) {
      CHECK(out[i] >= std::min(ua[i], ul[i]) - 1e-12);
      CHECK(out[i] <= std::max(ua[i], ul[i]) + 1e-12);
    }
    const double s = 3.5;
    const Input scaled = fuzzy::blend(Input(s * ua), Input(s * ul), mu, 1.0 - mu);
    CHECK((scaled - s * out).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("blend continuity in gamma") {
  const fuzzy::FuzzyConfig cfg;
  const Input ua(4.0, -2.0);
  const Input ul(-1.0, 1.0);
  double prev_ut = 0.0;
  bool first = true;
  for (int i = 0; i <= 2000; ++i) {
    const double gamma = kPi * i / 2000.0;
    const auto m = fuzzy::memberships(gamma, cfg);
    const Input out = fuzzy::blend(ua, ul, m.mu_arma, m.mu_lqr);
    if (!first) CHECK(std::abs(out[kUT] - prev_ut) <= 0.02);
    prev_ut = out[kUT];
    first = false;
  }
}

TEST_CASE("blend rejects empty rule base") {
  const Input u(1.0, 1.0);
  CHECK_THROWS_AS(fuzzy::blend(u, u, 0.0, 0.0), fuzzy::EmptyRuleBase);
  CHECK_THROWS_AS(fuzzy::blend(u, u, 0.0, 0.0), std::domain_error);
}
