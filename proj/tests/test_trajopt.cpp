#include <doctest.h>

#include <cmath>
#include <random>

#include <bicopter/trajopt.hpp>

#include "helpers.hpp"

using namespace bicopter;
using namespace bicopter::trajopt;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testutil::kPi;

namespace {

// Decision vector at the exact hover-hold point of hover_problem.
VectorXd hover_point(const NlpInstance& nlp, double T) {
  const auto& L = nlp.layout();
  const auto& p = nlp.problem();
  VectorXd z = VectorXd::Zero(L.num_vars());
  for (int k = 0; k <= L.N; ++k) {
    z.segment(L.x_offset(k), L.nx) = p.x_i;
    z.segment(L.u_offset(k), L.nu) = p.u_f;
  }
  z[L.t_offset()] = T;
  return z;
}

VectorXd random_point(const NlpInstance& nlp, std::mt19937_64& eng) {
  const auto& L = nlp.layout();
  VectorXd z(L.num_vars());
  for (int i = 0; i < L.num_vars(); ++i) z[i] = testutil::urand(eng, -1.0, 1.0);
  z[L.t_offset()] = testutil::urand(eng, 0.5, 3.0);
  // Keep the point inside the (partly infinite) bound set.
  z = z.cwiseMax(nlp.lower()).cwiseMin(nlp.upper());
  return z;
}

}  // namespace

TEST_CASE("layout arithmetic for N=2") {
  const NlpInstance nlp = transcribe(testutil::flip_problem(2));
  CHECK(nlp.layout().num_vars() == 25);
  CHECK(nlp.layout().num_residuals() == 26);
  CHECK(nlp.layout().t_offset() == 24);
}

TEST_CASE("invalid problems are rejected with the field named") {
  auto p = testutil::flip_problem(10);
  p.N = 1;
  CHECK_THROWS_WITH_AS(transcribe(p), doctest::Contains("N"),
                       std::invalid_argument);

  p = testutil::flip_problem(10);
  p.T_init = 0.05;  // below T_min
  CHECK_THROWS_WITH_AS(transcribe(p), doctest::Contains("T_init"),
                       std::invalid_argument);

  p = testutil::flip_problem(10);
  p.x_i[kR1] = -2.0;  // outside [-1, 1]
  CHECK_THROWS_WITH_AS(transcribe(p), doctest::Contains("x_i"),
                       std::invalid_argument);

  p = testutil::flip_problem(10);
  p.Q_x(0, 1) = 1.0;  // asymmetric
  CHECK_THROWS_WITH_AS(transcribe(p), doctest::Contains("Q_x"),
                       std::invalid_argument);

  p = testutil::flip_problem(10);
  p.Q_u = -MatrixXd::Identity(2, 2);
  CHECK_THROWS_WITH_AS(transcribe(p), doctest::Contains("Q_u"),
                       std::invalid_argument);

  p = testutil::flip_problem(10);
  p.u_lo[0] = 30.0;  // crosses u_hi
  CHECK_THROWS_WITH_AS(transcribe(p), doctest::Contains("u_lo"),
                       std::invalid_argument);
}

TEST_CASE("hover-hold point zeroes every residual") {
  const NlpInstance nlp = transcribe(testutil::hover_problem(4));
  VectorXd c;
  NlpInstance copy = nlp;
  copy.residuals(hover_point(nlp, 2.5), c);
  CHECK(c.size() == nlp.layout().num_residuals());
  CHECK(c.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("objective equals T at a terminal-exact point") {
  NlpInstance nlp = transcribe(testutil::hover_problem(4));
  CHECK(nlp.objective(hover_point(nlp, 1.5)) == doctest::Approx(1.5));

  // Push x_N off target by e in one component: objective = T + 100 e^2.
  VectorXd z = hover_point(nlp, 1.5);
  const auto& L = nlp.layout();
  z[L.x_offset(L.N) + kV1] += 0.2;
  CHECK(nlp.objective(z) == doctest::Approx(1.5 + 100.0 * 0.04));
}

TEST_CASE("augmented-Lagrangian gradient matches finite differences") {
  NlpInstance nlp = transcribe(testutil::flip_problem(3));
  std::mt19937_64 eng(21);
  const VectorXd z0 = random_point(nlp, eng);
  VectorXd lam(nlp.layout().num_residuals());
  for (int i = 0; i < lam.size(); ++i) lam[i] = testutil::urand(eng, -1.0, 1.0);
  const double rho = 10.0;

  VectorXd grad;
  nlp.augmented_lagrangian(z0, lam, rho, grad);

  VectorXd gfd(z0.size());
  VectorXd tmp;
  const double step = 1e-6;
  for (int i = 0; i < z0.size(); ++i) {
    VectorXd zp = z0, zm = z0;
    zp[i] += step;
    zm[i] -= step;
    const double fp = nlp.augmented_lagrangian(zp, lam, rho, tmp);
    const double fm = nlp.augmented_lagrangian(zm, lam, rho, tmp);
    gfd[i] = (fp - fm) / (2.0 * step);
  }
  const double scale = std::max(1.0, gfd.cwiseAbs().maxCoeff());
  CHECK((grad - gfd).cwiseAbs().maxCoeff() <= 1e-5 * scale);
}

TEST_CASE("plain objective gradient matches finite differences") {
  NlpInstance nlp = transcribe(testutil::flip_problem(3));
  std::mt19937_64 eng(33);
  const VectorXd z0 = random_point(nlp, eng);
  const VectorXd lam = VectorXd::Zero(nlp.layout().num_residuals());

  VectorXd grad;
  nlp.augmented_lagrangian(z0, lam, 0.0, grad);

  VectorXd tmp;
  const double step = 1e-6;
  for (int i = 0; i < z0.size(); ++i) {
    VectorXd zp = z0, zm = z0;
    zp[i] += step;
    zm[i] -= step;
    const double g =
        (nlp.objective(zp) - nlp.objective(zm)) / (2.0 * step);
    CHECK(grad[i] == doctest::Approx(g).epsilon(1e-4));
  }
}

TEST_CASE("defect k depends only on its own knot variables and T") {
  NlpInstance nlp = transcribe(testutil::flip_problem(4));
  std::mt19937_64 eng(27);
  const VectorXd z0 = random_point(nlp, eng);
  const auto& L = nlp.layout();

  VectorXd c0, c1;
  nlp.residuals(z0, c0);

  // Perturbing x_3 or u_2 must leave defect 0 (x_1 - x_0 - dt f(x_0,u_0))
  // untouched.
  VectorXd z = z0;
  z[L.x_offset(3) + kV2] += 0.37;
  z[L.u_offset(2) + kUT] += 0.41;
  nlp.residuals(z, c1);
  CHECK((c1.segment(L.defect_offset(0), L.nx) -
         c0.segment(L.defect_offset(0), L.nx))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // Perturbing T touches every defect but no boundary residual.
  z = z0;
  z[L.t_offset()] += 0.1;
  nlp.residuals(z, c1);
  CHECK((c1.segment(L.defect_offset(0), L.nx) -
         c0.segment(L.defect_offset(0), L.nx))
            .cwiseAbs()
            .maxCoeff() > 0.0);
  CHECK((c1.tail(2 * L.nx + L.nu) - c0.tail(2 * L.nx + L.nu))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("initial guess is projected into bounds with T = T_init") {
  const NlpInstance nlp = transcribe(testutil::flip_problem(5));
  const VectorXd z = nlp.initial_guess();
  CHECK(z[nlp.layout().t_offset()] == 10.0);
  CHECK((z.array() >= nlp.lower().array()).all());
  CHECK((z.array() <= nlp.upper().array()).all());
  // Zero thrust violates uT >= 1; the guess must sit on that bound.
  CHECK(z[nlp.layout().u_offset(0) + kUT] == 1.0);
}

TEST_CASE("double-integrator minimum time is bang-bang") {
  SolveInfo info;
  const OptimalTrajectory traj =
      solve(testutil::di_problem(200), testutil::tuned_options(), &info);

  CHECK(traj.T_star >= 1.95);
  CHECK(traj.T_star <= 2.05);
  CHECK(traj.feasibility <= 1e-6);

  // Inputs sit within 0.05 of +/-1 outside a switching window of <= 5 knots.
  int off_bang = 0;
  for (int k = 0; k < 200; ++k) {
    const double u = traj.us(0, k);
    if (std::min(std::abs(u - 1.0), std::abs(u + 1.0)) > 0.05) ++off_bang;
  }
  CHECK(off_bang <= 5);
}

TEST_CASE("hover-hold drives T to its lower bound") {
  const OptimalTrajectory traj =
      solve(testutil::hover_problem(20), testutil::tuned_options());
  CHECK(traj.T_star == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("small flip solves to tolerance and near the expected time") {
  const OptimalTrajectory& traj = testutil::shared_flip();
  CHECK(traj.feasibility <= 1e-6);
  CHECK(std::abs(traj.T_star - 1.6278) <= 0.05 * 1.6278);
  CHECK(traj.xs.col(0).isZero(0.0));  // x_0 pinned exactly
  CHECK(traj.dt == traj.T_star / 40);
}

TEST_CASE("feasibility_report on a solved trajectory") {
  const auto prob = testutil::flip_problem(40);
  const OptimalTrajectory& traj = testutil::shared_flip();
  const auto rep = feasibility_report(traj, prob);
  CHECK(rep.worst() <= 1e-6);

  // Corrupting one knot shows up as a large defect.
  OptimalTrajectory bad = traj;
  bad.xs(kR2, 17) += 0.1;
  const auto rep2 = feasibility_report(bad, prob);
  CHECK(rep2.max_defect >= 0.05);
}

TEST_CASE("stored knots match an open-loop Euler rollout") {
  const OptimalTrajectory& traj = testutil::shared_flip();
  State x = traj.xs.col(0);
  double worst = 0.0;
  for (int k = 0; k < 40; ++k) {
    x = euler_step(x, Input(traj.us.col(k)), traj.dt, {});
    worst = std::max(worst,
                     (x - State(traj.xs.col(k + 1))).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 40 * 1e-6);
}

TEST_CASE("accepted outer violations are non-increasing") {
  SolveInfo info;
  solve(testutil::di_problem(60), testutil::tuned_options(), &info);
  REQUIRE(info.accepted_violations.size() >= 1);
  for (std::size_t i = 1; i < info.accepted_violations.size(); ++i) {
    CHECK(info.accepted_violations[i] <= info.accepted_violations[i - 1]);
  }
}

TEST_CASE("solve is deterministic") {
  const auto opts = testutil::tuned_options();
  const OptimalTrajectory a = solve(testutil::di_problem(60), opts);
  const OptimalTrajectory b = solve(testutil::di_problem(60), opts);
  CHECK(a.T_star == b.T_star);
  CHECK(a.xs == b.xs);
  CHECK(a.us == b.us);
  CHECK(a.feasibility == b.feasibility);
}

TEST_CASE("infeasible exit carries the best iterate") {
  SolverOptions opts = testutil::tuned_options();
  opts.max_outer = 1;
  opts.max_inner = 5;
  try {
    solve(testutil::flip_problem(20), opts);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.best().num_knots() == 21);
    CHECK(e.info().violation > opts.eq_tol);
    CHECK(e.info().status == SolveStatus::kInfeasible);
  }
}

TEST_CASE("feasible but non-stationary exit reports a stall") {
  SolverOptions opts = testutil::tuned_options();
  opts.eq_tol = 0.5;      // trivially satisfied
  opts.stat_tol = 1e-30;  // unreachable
  opts.max_outer = 3;
  CHECK_THROWS_AS(solve(testutil::hover_problem(4), opts), StalledError);
}
