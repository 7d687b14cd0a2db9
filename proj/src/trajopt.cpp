#include "bicopter/trajopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "bicopter/box_lbfgs.hpp"

namespace bicopter::trajopt {

namespace {

const double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
  if (!ok) {
    throw std::invalid_argument(std::string("TrajOptProblem: ") + what);
  }
}

void check_weight(const MatrixXd& Q, int dim, const char* name) {
  std::ostringstream msg;
  if (Q.rows() != dim || Q.cols() != dim) {
    msg << name << " must be " << dim << "x" << dim;
    throw std::invalid_argument("TrajOptProblem: " + msg.str());
  }
  const double scale = 1.0 + Q.cwiseAbs().maxCoeff();
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    msg << name << " must be symmetric";
    throw std::invalid_argument("TrajOptProblem: " + msg.str());
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Q, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
    msg << name << " must be positive semidefinite";
    throw std::invalid_argument("TrajOptProblem: " + msg.str());
  }
}

}  // namespace

Model bicopter_model(const PlantParams& p) {
  Model m;
  m.nx = kStateDim;
  m.nu = kInputDim;
  m.deriv = [p](const VectorXd& x, const VectorXd& u, VectorXd& dx) {
    dx = deriv(State(x), Input(u), p);
  };
  m.jacobians = [p](const VectorXd& x, const VectorXd& u, MatrixXd& A,
                    MatrixXd& B) {
    StateJacobian Af;
    InputJacobian Bf;
    jacobians(State(x), Input(u), p, Af, Bf);
    A = Af;
    B = Bf;
  };
  return m;
}

void validate(const TrajOptProblem& prob) {
  const int nx = prob.model.nx;
  const int nu = prob.model.nu;
  require(nx > 0 && nu > 0, "model dimensions must be positive");
  require(static_cast<bool>(prob.model.deriv), "model.deriv must be set");
  require(static_cast<bool>(prob.model.jacobians), "model.jacobians must be set");
  require(prob.N >= 2, "N must be >= 2");
  require(prob.T_min > 0.0, "T_min must be positive");
  require(prob.T_init > prob.T_min, "T_init must exceed T_min");
  require(prob.x_i.size() == nx, "x_i has wrong dimension");
  require(prob.x_f.size() == nx, "x_f has wrong dimension");
  require(prob.u_f.size() == nu, "u_f has wrong dimension");
  require(prob.x_lo.size() == nx && prob.x_hi.size() == nx,
          "x_lo/x_hi have wrong dimension");
  require(prob.u_lo.size() == nu && prob.u_hi.size() == nu,
          "u_lo/u_hi have wrong dimension");
  require(prob.x_i.allFinite(), "x_i must be finite");
  require(prob.x_f.allFinite(), "x_f must be finite");
  require(prob.u_f.allFinite(), "u_f must be finite");
  require((prob.x_lo.array() <= prob.x_hi.array()).all(),
          "x_lo must not exceed x_hi");
  require((prob.u_lo.array() <= prob.u_hi.array()).all(),
          "u_lo must not exceed u_hi");
  require((prob.x_i.array() >= prob.x_lo.array()).all() &&
              (prob.x_i.array() <= prob.x_hi.array()).all(),
          "x_i outside state bounds");
  require((prob.x_f.array() >= prob.x_lo.array()).all() &&
              (prob.x_f.array() <= prob.x_hi.array()).all(),
          "x_f outside state bounds");
  require((prob.u_f.array() >= prob.u_lo.array()).all() &&
              (prob.u_f.array() <= prob.u_hi.array()).all(),
          "u_f outside input bounds");
  check_weight(prob.Q_x, nx, "Q_x");
  check_weight(prob.Q_u, nu, "Q_u");
}

NlpInstance::NlpInstance(TrajOptProblem prob) : prob_(std::move(prob)) {
  validate(prob_);
  layout_ = VariableLayout{prob_.N, prob_.model.nx, prob_.model.nu};
  const int N = layout_.N;
  const int nx = layout_.nx;
  const int nu = layout_.nu;

  lower_.resize(layout_.num_vars());
  upper_.resize(layout_.num_vars());
  for (int k = 0; k <= N; ++k) {
    if (k == 0) {
      // Knot 0 is pinned by equal bounds so the returned trajectory starts at
      // x_i exactly, not merely to equality tolerance.
      lower_.segment(layout_.x_offset(0), nx) = prob_.x_i;
      upper_.segment(layout_.x_offset(0), nx) = prob_.x_i;
    } else {
      lower_.segment(layout_.x_offset(k), nx) = prob_.x_lo;
      upper_.segment(layout_.x_offset(k), nx) = prob_.x_hi;
    }
    lower_.segment(layout_.u_offset(k), nu) = prob_.u_lo;
    upper_.segment(layout_.u_offset(k), nu) = prob_.u_hi;
  }
  lower_[layout_.t_offset()] = prob_.T_min;
  upper_[layout_.t_offset()] = kInf;

  xk_.resize(nx);
  uk_.resize(nu);
  fk_.resize(nx);
  ck_.resize(nx);
  wk_.resize(nx);
  ex_.resize(nx);
  eu_.resize(nu);
  qx_.resize(nx);
  qu_.resize(nu);
  A_.resize(nx, nx);
  B_.resize(nx, nu);
}

NlpInstance transcribe(const TrajOptProblem& prob) { return NlpInstance(prob); }

VectorXd NlpInstance::initial_guess() const {
  VectorXd z = VectorXd::Zero(layout_.num_vars());
  z[layout_.t_offset()] = prob_.T_init;
  return z.cwiseMax(lower_).cwiseMin(upper_);
}

double NlpInstance::objective(const VectorXd& z) {
  const int nx = layout_.nx;
  const int nu = layout_.nu;
  ex_ = prob_.x_f - z.segment(layout_.x_offset(layout_.N), nx);
  eu_ = prob_.u_f - z.segment(layout_.u_offset(layout_.N), nu);
  qx_.noalias() = prob_.Q_x * ex_;
  qu_.noalias() = prob_.Q_u * eu_;
  return z[layout_.t_offset()] + ex_.dot(qx_) + eu_.dot(qu_);
}

void NlpInstance::residuals(const VectorXd& z, VectorXd& c) {
  const int N = layout_.N;
  const int nx = layout_.nx;
  const int nu = layout_.nu;
  c.resize(layout_.num_residuals());
  const double dt = z[layout_.t_offset()] / N;
  for (int k = 0; k < N; ++k) {
    xk_ = z.segment(layout_.x_offset(k), nx);
    uk_ = z.segment(layout_.u_offset(k), nu);
    prob_.model.deriv(xk_, uk_, fk_);
    c.segment(layout_.defect_offset(k), nx) =
        z.segment(layout_.x_offset(k + 1), nx) - xk_ - dt * fk_;
  }
  c.segment(layout_.init_offset(), nx) =
      z.segment(layout_.x_offset(0), nx) - prob_.x_i;
  c.segment(layout_.final_x_offset(), nx) =
      z.segment(layout_.x_offset(N), nx) - prob_.x_f;
  c.segment(layout_.final_u_offset(), nu) =
      z.segment(layout_.u_offset(N), nu) - prob_.u_f;
}

double NlpInstance::augmented_lagrangian(const VectorXd& z, const VectorXd& lam,
                                         double rho, VectorXd& grad) {
  const int N = layout_.N;
  const int nx = layout_.nx;
  const int nu = layout_.nu;
  const int t_off = layout_.t_offset();
  const double T = z[t_off];
  const double dt = T / N;

  grad.setZero(layout_.num_vars());
  double val = T;
  grad[t_off] = 1.0;

  ex_ = prob_.x_f - z.segment(layout_.x_offset(N), nx);
  qx_.noalias() = prob_.Q_x * ex_;
  val += ex_.dot(qx_);
  grad.segment(layout_.x_offset(N), nx) -= 2.0 * qx_;
  eu_ = prob_.u_f - z.segment(layout_.u_offset(N), nu);
  qu_.noalias() = prob_.Q_u * eu_;
  val += eu_.dot(qu_);
  grad.segment(layout_.u_offset(N), nu) -= 2.0 * qu_;

  double gT = 0.0;  // accumulated defect sensitivity to T through dt = T/N
  for (int k = 0; k < N; ++k) {
    xk_ = z.segment(layout_.x_offset(k), nx);
    uk_ = z.segment(layout_.u_offset(k), nu);
    prob_.model.deriv(xk_, uk_, fk_);
    prob_.model.jacobians(xk_, uk_, A_, B_);
    ck_ = z.segment(layout_.x_offset(k + 1), nx) - xk_ - dt * fk_;
    const auto lamk = lam.segment(layout_.defect_offset(k), nx);
    val += lamk.dot(ck_) + 0.5 * rho * ck_.squaredNorm();
    wk_ = lamk + rho * ck_;
    grad.segment(layout_.x_offset(k + 1), nx) += wk_;
    grad.segment(layout_.x_offset(k), nx) -= wk_;
    grad.segment(layout_.x_offset(k), nx).noalias() -=
        dt * (A_.transpose() * wk_);
    grad.segment(layout_.u_offset(k), nu).noalias() -=
        dt * (B_.transpose() * wk_);
    gT += fk_.dot(wk_);
  }
  grad[t_off] -= gT / N;

  ck_ = z.segment(layout_.x_offset(0), nx) - prob_.x_i;
  wk_ = lam.segment(layout_.init_offset(), nx) + rho * ck_;
  val += lam.segment(layout_.init_offset(), nx).dot(ck_) +
         0.5 * rho * ck_.squaredNorm();
  grad.segment(layout_.x_offset(0), nx) += wk_;

  ck_ = z.segment(layout_.x_offset(N), nx) - prob_.x_f;
  wk_ = lam.segment(layout_.final_x_offset(), nx) + rho * ck_;
  val += lam.segment(layout_.final_x_offset(), nx).dot(ck_) +
         0.5 * rho * ck_.squaredNorm();
  grad.segment(layout_.x_offset(N), nx) += wk_;

  eu_ = z.segment(layout_.u_offset(N), nu) - prob_.u_f;
  qu_ = lam.segment(layout_.final_u_offset(), nu) + rho * eu_;
  val += lam.segment(layout_.final_u_offset(), nu).dot(eu_) +
         0.5 * rho * eu_.squaredNorm();
  grad.segment(layout_.u_offset(N), nu) += qu_;

  return val;
}

namespace {

OptimalTrajectory assemble(NlpInstance& nlp, const VectorXd& z) {
  const auto& L = nlp.layout();
  OptimalTrajectory traj;
  traj.T_star = z[L.t_offset()];
  traj.dt = traj.T_star / L.N;
  traj.xs.resize(L.nx, L.N + 1);
  traj.us.resize(L.nu, L.N + 1);
  for (int k = 0; k <= L.N; ++k) {
    traj.xs.col(k) = z.segment(L.x_offset(k), L.nx);
    traj.us.col(k) = z.segment(L.u_offset(k), L.nu);
  }
  VectorXd c;
  nlp.residuals(z, c);
  traj.feasibility = c.head(L.nx * L.N).lpNorm<Eigen::Infinity>();
  traj.objective = nlp.objective(z);
  return traj;
}

}  // namespace

OptimalTrajectory solve(const TrajOptProblem& prob, const SolverOptions& opts,
                        SolveInfo* info_out) {
  NlpInstance nlp = transcribe(prob);
  const auto& L = nlp.layout();

  VectorXd z = nlp.initial_guess();
  VectorXd lam = VectorXd::Zero(L.num_residuals());
  VectorXd c(L.num_residuals());
  double rho = opts.penalty_init;
  double omega = opts.omega_init;

  SolveInfo info;
  VectorXd best_z = z;
  double best_viol = kInf;
  double prev_viol = kInf;
  bool converged = false;
  bool stalled = false;
  int idle_outers = 0;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    opt::BoxLbfgsOptions inner_opts;
    inner_opts.max_iters = opts.max_inner;
    inner_opts.grad_tol = std::max(omega, opts.stat_tol);
    inner_opts.memory = opts.lbfgs_memory;
    auto fg = [&nlp, &lam, rho](const VectorXd& zz, VectorXd& g) {
      return nlp.augmented_lagrangian(zz, lam, rho, g);
    };
    auto res = opt::minimize_box(fg, std::move(z), nlp.lower(), nlp.upper(),
                                 inner_opts);
    z = std::move(res.x);
    info.inner_iters += res.iters;
    info.evals += res.evals;
    info.outer_iters = outer + 1;

    nlp.residuals(z, c);
    const double viol = c.lpNorm<Eigen::Infinity>();
    info.penalty = rho;
    info.violation = viol;
    info.stationarity = res.pg_norm;
    info.outer_log.push_back(
        {res.iters, res.status == opt::BoxLbfgsStatus::kConverged, viol,
         res.pg_norm, rho});

    if (viol <= best_viol) {
      best_viol = viol;
      best_z = z;
      info.accepted_violations.push_back(viol);
    }
    if (viol <= opts.eq_tol && res.pg_norm <= opts.stat_tol) {
      converged = true;
      break;
    }

    // Three consecutive passes without a single accepted inner step means the
    // multiplier and penalty nudges are no longer moving the iterate.
    idle_outers = (res.iters == 0) ? idle_outers + 1 : 0;
    if (idle_outers >= 3) {
      stalled = true;
      break;
    }

    lam.noalias() += rho * c;
    // Judge the penalty only against outer passes whose subproblem was
    // actually solved; escalating on an unconverged inner pass just wrecks
    // the conditioning of the next one.
    if (res.status == opt::BoxLbfgsStatus::kConverged) {
      if (viol > prev_viol / opts.viol_drop) {
        rho = std::min(rho * opts.penalty_scale, opts.penalty_max);
      }
      prev_viol = viol;
    }
    omega = std::max(omega * opts.omega_scale, opts.stat_tol);
  }

  if (converged) {
    info.status = SolveStatus::kConverged;
    if (info_out) *info_out = info;
    return assemble(nlp, z);
  }

  OptimalTrajectory best = assemble(nlp, best_z);
  std::ostringstream msg;
  if (!stalled && best_viol > opts.eq_tol) {
    info.status = SolveStatus::kInfeasible;
    if (info_out) *info_out = info;
    msg << "trajopt: equality violation " << best_viol << " above " << opts.eq_tol
        << " after " << info.outer_iters << " outer iterations";
    throw InfeasibleError(msg.str(), std::move(best), info);
  }
  info.status = SolveStatus::kStalled;
  if (info_out) *info_out = info;
  msg << "trajopt: stalled with violation " << best_viol << ", stationarity "
      << info.stationarity << " after " << info.outer_iters
      << " outer iterations";
  throw StalledError(msg.str(), std::move(best), info);
}

double FeasibilityReport::worst() const {
  return std::max({max_defect, max_bound_violation, x0_error, xf_error,
                   uf_error});
}

FeasibilityReport feasibility_report(const OptimalTrajectory& traj,
                                     const TrajOptProblem& prob) {
  const int nx = prob.model.nx;
  const int nu = prob.model.nu;
  const int N = traj.num_knots() - 1;
  FeasibilityReport rep;

  VectorXd xk(nx), uk(nu), fk(nx);
  for (int k = 0; k < N; ++k) {
    xk = traj.xs.col(k);
    uk = traj.us.col(k);
    prob.model.deriv(xk, uk, fk);
    const double defect = (traj.xs.col(k + 1) - traj.xs.col(k) - traj.dt * fk)
                              .lpNorm<Eigen::Infinity>();
    rep.max_defect = std::max(rep.max_defect, defect);
  }

  for (int k = 0; k <= N; ++k) {
    rep.max_bound_violation = std::max(
        {rep.max_bound_violation,
         (prob.x_lo - traj.xs.col(k)).maxCoeff(),
         (traj.xs.col(k) - prob.x_hi).maxCoeff(),
         (prob.u_lo - traj.us.col(k)).maxCoeff(),
         (traj.us.col(k) - prob.u_hi).maxCoeff()});
  }
  rep.max_bound_violation =
      std::max(rep.max_bound_violation, prob.T_min - traj.T_star);
  rep.max_bound_violation = std::max(rep.max_bound_violation, 0.0);

  rep.x0_error = (traj.xs.col(0) - prob.x_i).lpNorm<Eigen::Infinity>();
  rep.xf_error = (traj.xs.col(N) - prob.x_f).lpNorm<Eigen::Infinity>();
  rep.uf_error = (traj.us.col(N) - prob.u_f).lpNorm<Eigen::Infinity>();
  return rep;
}

}  // namespace bicopter::trajopt
