#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicopter/dynamics.hpp"

namespace bicopter::trajopt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Continuous-time model hooks so the transcription works for any small dense
// system (the bicopter for the real problem, a double integrator in tests).
struct Model {
  int nx = 0;
  int nu = 0;
  std::function<void(const VectorXd& x, const VectorXd& u, VectorXd& dx)> deriv;
  std::function<void(const VectorXd& x, const VectorXd& u, MatrixXd& A,
                     MatrixXd& B)>
      jacobians;
};

Model bicopter_model(const PlantParams& p = {});

// Minimum-time problem: minimize T + (x_f-x_N)'Qx(x_f-x_N) + (u_f-u_N)'Qu(u_f-u_N)
// subject to Euler defects x_{k+1} = x_k + (T/N) f(x_k,u_k), pinned endpoints,
// and box bounds on every knot.
struct TrajOptProblem {
  Model model;
  VectorXd x_i;
  VectorXd x_f;
  VectorXd u_f;
  int N = 0;
  MatrixXd Q_x;
  MatrixXd Q_u;
  VectorXd x_lo, x_hi;
  VectorXd u_lo, u_hi;
  double T_init = 10.0;
  double T_min = 0.1;
};

// Throws std::invalid_argument naming the offending field.
void validate(const TrajOptProblem& prob);

// Decision vector layout: x_0..x_N, u_0..u_N, T (T last).
struct VariableLayout {
  int N = 0;
  int nx = 0;
  int nu = 0;
  int x_offset(int k) const { return nx * k; }
  int u_offset(int k) const { return nx * (N + 1) + nu * k; }
  int t_offset() const { return (nx + nu) * (N + 1); }
  int num_vars() const { return (nx + nu) * (N + 1) + 1; }
  // Equality residuals stack N defects, then x_0-x_i, x_N-x_f, u_N-u_f.
  int defect_offset(int k) const { return nx * k; }
  int init_offset() const { return nx * N; }
  int final_x_offset() const { return nx * (N + 1); }
  int final_u_offset() const { return nx * (N + 2); }
  int num_residuals() const { return nx * (N + 2) + nu; }
};

// Materialized NLP: objective/residual/augmented-Lagrangian evaluation plus
// the bound set. Evaluation methods reuse internal scratch, so one instance
// must not be shared across threads.
class NlpInstance {
 public:
  explicit NlpInstance(TrajOptProblem prob);

  const TrajOptProblem& problem() const { return prob_; }
  const VariableLayout& layout() const { return layout_; }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }

  // T = T_init, everything else zero, projected into the bound set.
  VectorXd initial_guess() const;

  double objective(const VectorXd& z);
  void residuals(const VectorXd& z, VectorXd& c);
  // Value and gradient of f + lam'c + (rho/2)|c|^2. With lam = 0, rho = 0
  // this is the plain objective and its gradient.
  double augmented_lagrangian(const VectorXd& z, const VectorXd& lam,
                              double rho, VectorXd& grad);

 private:
  TrajOptProblem prob_;
  VariableLayout layout_;
  VectorXd lower_, upper_;
  // scratch
  VectorXd xk_, uk_, fk_, ck_, wk_, ex_, eu_, qx_, qu_;
  MatrixXd A_, B_;
};

NlpInstance transcribe(const TrajOptProblem& prob);

struct SolverOptions {
  double eq_tol = 1e-6;    // max-norm equality feasibility
  double stat_tol = 1e-4;  // projected-gradient norm of the augmented Lagrangian
  int max_outer = 50;
  int max_inner = 500;  // inner quasi-Newton iterations per outer pass
  double penalty_init = 10.0;
  double penalty_scale = 10.0;
  double penalty_max = 1e8;  // conditioning guard for the inner solver
  double viol_drop = 4.0;   // required violation reduction between outers
  double omega_init = 1e-2;  // inner tolerance schedule, tightened each outer
  double omega_scale = 0.2;
  int lbfgs_memory = 10;
};

enum class SolveStatus { kConverged, kInfeasible, kStalled };

struct OuterLog {
  int inner_iters = 0;
  bool inner_converged = false;
  double violation = 0.0;
  double stationarity = 0.0;
  double penalty = 0.0;
};

struct SolveInfo {
  SolveStatus status = SolveStatus::kConverged;
  int outer_iters = 0;
  long inner_iters = 0;
  long evals = 0;
  double penalty = 0.0;
  double violation = 0.0;      // final max equality violation
  double stationarity = 0.0;   // final projected-gradient norm
  std::vector<OuterLog> outer_log;
  // Violation at each accepted (incumbent-improving) outer iterate;
  // non-increasing by construction.
  std::vector<double> accepted_violations;
};

struct OptimalTrajectory {
  double T_star = 0.0;
  double dt = 0.0;       // T_star / N
  MatrixXd xs;           // nx x (N+1), column k = state at knot k
  MatrixXd us;           // nu x (N+1)
  double feasibility = 0.0;  // max defect inf-norm
  double objective = 0.0;

  int num_knots() const { return static_cast<int>(xs.cols()); }
  // Zero-order-hold knot selector: min(floor(t/dt), N), clamped at 0.
  int knot_index(double t) const {
    const int n = num_knots() - 1;
    if (n <= 0 || dt <= 0.0 || t <= 0.0) return 0;
    const int k = static_cast<int>(t / dt);
    return k < n ? k : n;
  }
};

class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& msg, OptimalTrajectory best, SolveInfo info)
      : std::runtime_error(msg), best_(std::move(best)), info_(std::move(info)) {}
  const OptimalTrajectory& best() const { return best_; }
  const SolveInfo& info() const { return info_; }

 private:
  OptimalTrajectory best_;
  SolveInfo info_;
};

// Equality violation not brought below eq_tol within the outer-iteration cap.
class InfeasibleError : public SolveError {
  using SolveError::SolveError;
};

// Feasible but the inner solver stopped making progress short of stationarity.
class StalledError : public SolveError {
  using SolveError::SolveError;
};

// Augmented-Lagrangian outer loop around the projected quasi-Newton inner
// solver. Deterministic: same problem and options give bit-identical results.
OptimalTrajectory solve(const TrajOptProblem& prob,
                        const SolverOptions& opts = {},
                        SolveInfo* info_out = nullptr);

struct FeasibilityReport {
  double max_defect = 0.0;
  double max_bound_violation = 0.0;
  double x0_error = 0.0;  // |xs[0] - x_i| inf-norm
  double xf_error = 0.0;  // |xs[N] - x_f|
  double uf_error = 0.0;  // |us[N] - u_f|
  double worst() const;
};

// Recomputes every residual from the stored knots; no solver state involved.
FeasibilityReport feasibility_report(const OptimalTrajectory& traj,
                                     const TrajOptProblem& prob);

}  // namespace bicopter::trajopt
