#pragma once

#include <limits>
#include <random>

#include <bicopter/dynamics.hpp>
#include <bicopter/lqr.hpp>
#include <bicopter/trajopt.hpp>

namespace testutil {

constexpr double kPi = 3.14159265358979323846;

inline double urand(std::mt19937_64& eng, double lo, double hi) {
  const double u = (eng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

inline bicopter::trajopt::TrajOptProblem flip_problem(int N) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const double inf = std::numeric_limits<double>::infinity();
  bicopter::trajopt::TrajOptProblem p;
  p.model = bicopter::trajopt::bicopter_model({});
  p.x_i = VectorXd::Zero(6);
  p.x_f = VectorXd::Zero(6);
  p.x_f[bicopter::kR2] = 3.0;
  p.x_f[bicopter::kPsi] = 2.0 * kPi;
  p.u_f = VectorXd(2);
  p.u_f << 9.81, 0.0;
  p.N = N;
  p.Q_x = 100.0 * MatrixXd::Identity(6, 6);
  p.Q_u = 100.0 * MatrixXd::Identity(2, 2);
  p.x_lo = VectorXd::Constant(6, -inf);
  p.x_hi = VectorXd::Constant(6, inf);
  p.x_lo[bicopter::kR1] = -1.0;
  p.x_hi[bicopter::kR1] = 1.0;
  p.x_lo[bicopter::kR2] = 0.0;
  p.x_hi[bicopter::kR2] = 3.0;
  p.u_lo = VectorXd(2);
  p.u_lo << 1.0, -15.0;
  p.u_hi = VectorXd(2);
  p.u_hi << 20.0, 15.0;
  return p;
}

// 1-D double integrator, rest-to-rest over unit distance, |u| <= 1. The
// analytic minimum time is 2 with a single switch at T/2.
inline bicopter::trajopt::TrajOptProblem di_problem(int N) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const double inf = std::numeric_limits<double>::infinity();
  bicopter::trajopt::TrajOptProblem p;
  p.model.nx = 2;
  p.model.nu = 1;
  p.model.deriv = [](const VectorXd& x, const VectorXd& u, VectorXd& dx) {
    dx.resize(2);
    dx << x[1], u[0];
  };
  p.model.jacobians = [](const VectorXd&, const VectorXd&, MatrixXd& A,
                         MatrixXd& B) {
    A = MatrixXd::Zero(2, 2);
    A(0, 1) = 1.0;
    B = MatrixXd::Zero(2, 1);
    B(1, 0) = 1.0;
  };
  p.x_i = VectorXd::Zero(2);
  p.x_f = VectorXd(2);
  p.x_f << 1.0, 0.0;
  p.u_f = VectorXd::Zero(1);
  p.N = N;
  p.Q_x = 100.0 * MatrixXd::Identity(2, 2);
  p.Q_u = 100.0 * MatrixXd::Identity(1, 1);
  p.x_lo = VectorXd::Constant(2, -inf);
  p.x_hi = VectorXd::Constant(2, inf);
  p.u_lo = VectorXd::Constant(1, -1.0);
  p.u_hi = VectorXd::Constant(1, 1.0);
  p.T_init = 5.0;
  return p;
}

inline bicopter::trajopt::TrajOptProblem hover_problem(int N) {
  bicopter::trajopt::TrajOptProblem p = flip_problem(N);
  p.x_f = p.x_i;
  return p;
}

inline bicopter::trajopt::SolverOptions tuned_options() {
  bicopter::trajopt::SolverOptions o;
  o.max_inner = 20000;
  o.lbfgs_memory = 30;
  return o;
}

// One modest flip solved once and shared across test cases.
inline const bicopter::trajopt::OptimalTrajectory& shared_flip() {
  static const bicopter::trajopt::OptimalTrajectory traj =
      bicopter::trajopt::solve(flip_problem(40), tuned_options());
  return traj;
}

inline const bicopter::lqr::GainSchedule& shared_sched() {
  static const bicopter::lqr::GainSchedule sched =
      bicopter::lqr::linearize_schedule(shared_flip(), {});
  return sched;
}

}  // namespace testutil
