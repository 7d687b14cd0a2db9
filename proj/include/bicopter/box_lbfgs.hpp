#pragma once

#include <Eigen/Dense>

#include <functional>

namespace bicopter::opt {

// Objective callback: returns f(x) and fills grad (resized to x.size()).
using ObjectiveFn =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BoxLbfgsOptions {
  int max_iters = 500;
  double grad_tol = 1e-6;  // inf-norm of the projected gradient x - P(x - g)
  int memory = 10;         // limited-memory curvature pairs
  double armijo_c = 1e-4;
  int max_backtracks = 50;
};

enum class BoxLbfgsStatus { kConverged, kIterLimit, kLineSearchFailed };

struct BoxLbfgsResult {
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  double f = 0.0;
  double pg_norm = 0.0;
  int iters = 0;
  int evals = 0;
  BoxLbfgsStatus status = BoxLbfgsStatus::kIterLimit;
};

// Minimizes f over the box [lower, upper] by projected quasi-Newton steps:
// an L-BFGS direction restricted to the non-binding variables, followed by
// a backtracking Armijo search along the projected arc x(a) = P(x + a*d).
// Deterministic: no randomization, fixed evaluation order.
BoxLbfgsResult minimize_box(const ObjectiveFn& fg, Eigen::VectorXd x0,
                            const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper,
                            const BoxLbfgsOptions& opts = {});

}  // namespace bicopter::opt
