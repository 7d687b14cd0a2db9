#include "bicopter/lqr.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bicopter::lqr {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXd;

// Solves Ac'X + X Ac = -W (Lyapunov) by the dense Kronecker system
// (I (+) Ac' + Ac' (+) I) vec(X) = -vec(W); fine at these sizes (n <= 6).
MatrixXd solve_lyapunov(const MatrixXd& Ac, const MatrixXd& W) {
  const int n = static_cast<int>(Ac.rows());
  MatrixXd M = MatrixXd::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j) {
    M.block(j * n, j * n, n, n) += Ac.transpose();
    for (int i = 0; i < n; ++i) {
      M.block(i * n, j * n, n, n).diagonal().array() += Ac(j, i);
    }
  }
  const VectorXd rhs = -Eigen::Map<const VectorXd>(W.data(), n * n);
  const VectorXd vx = M.partialPivLu().solve(rhs);
  MatrixXd X = Eigen::Map<const MatrixXd>(vx.data(), n, n);
  return 0.5 * (X + X.transpose());
}

}  // namespace

double care_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P) {
  const MatrixXd BtP = B.transpose() * P;
  const MatrixXd res =
      A.transpose() * P + P * A - BtP.transpose() * R.llt().solve(BtP) + Q;
  return res.norm() / std::max(1.0, P.norm());
}

bool is_hurwitz(const MatrixXd& M, double margin) {
  return M.eigenvalues().real().maxCoeff() < -margin;
}

MatrixXd solve_care(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                    const MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw std::invalid_argument("solve_care: dimension mismatch");
  }
  Eigen::LLT<MatrixXd> rllt(R);
  if (rllt.info() != Eigen::Success) {
    throw CareError(CareError::Kind::kIllConditioned,
                    "solve_care: R is not positive definite");
  }
  const MatrixXd S = B * rllt.solve(B.transpose());

  MatrixXd H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = A;
  H.topRightCorner(n, n) = -S;
  H.bottomLeftCorner(n, n) = -Q;
  H.bottomRightCorner(n, n) = -A.transpose();

  Eigen::EigenSolver<MatrixXd> es(H);
  if (es.info() != Eigen::Success) {
    throw CareError(CareError::Kind::kIllConditioned,
                    "solve_care: Hamiltonian eigendecomposition failed");
  }

  MatrixXcd U(2 * n, n);
  int stable = 0;
  for (int i = 0; i < 2 * n; ++i) {
    if (es.eigenvalues()[i].real() < 0.0) {
      if (stable < n) U.col(stable) = es.eigenvectors().col(i);
      ++stable;
    }
  }
  if (stable != n) {
    std::ostringstream msg;
    msg << "solve_care: stable invariant subspace has dimension " << stable
        << ", expected " << n;
    throw CareError(CareError::Kind::kNotStabilizable, msg.str());
  }

  const MatrixXcd U1t = U.topRows(n).transpose();
  Eigen::FullPivLU<MatrixXcd> lu(U1t);
  if (!lu.isInvertible()) {
    throw CareError(CareError::Kind::kIllConditioned,
                    "solve_care: stable subspace is not a graph over the state");
  }
  // P = U2 U1^-1, computed as (U1' \ U2')' without conjugation.
  MatrixXd P = lu.solve(U.bottomRows(n).transpose()).transpose().real();
  P = 0.5 * (P + P.transpose()).eval();

  // Kleinman-Newton polish: each step solves a Lyapunov equation at the
  // current stabilizing gain and converges quadratically.
  double res = care_residual(A, B, Q, R, P);
  for (int it = 0; it < 10 && res > 1e-12; ++it) {
    const MatrixXd K = rllt.solve(B.transpose() * P);
    const MatrixXd Ac = A - B * K;
    if (!is_hurwitz(Ac)) break;
    const MatrixXd Pn = solve_lyapunov(Ac, Q + K.transpose() * R * K);
    const double rn = care_residual(A, B, Q, R, Pn);
    if (!(rn < res)) break;
    P = Pn;
    res = rn;
  }

  if (res > 1e-8) {
    std::ostringstream msg;
    msg << "solve_care: residual " << res << " above 1e-8";
    throw CareError(CareError::Kind::kIllConditioned, msg.str());
  }
  return P;
}

MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const LqrWeights& w) {
  const MatrixXd P = solve_care(A, B, w.R1, w.R2);
  const MatrixXd K = w.R2.llt().solve(B.transpose() * P);
  if (!is_hurwitz(A - B * K)) {
    throw CareError(CareError::Kind::kIllConditioned,
                    "lqr_gain: closed loop is not Hurwitz");
  }
  return K;
}

GainSchedule linearize_schedule(const trajopt::OptimalTrajectory& traj,
                                const LqrWeights& w, const PlantParams& p) {
  const int n = traj.num_knots();
  GainSchedule sched;
  sched.t.reserve(n);
  sched.A.reserve(n);
  sched.B.reserve(n);
  sched.K.reserve(n);
  for (int k = 0; k < n; ++k) {
    const State xk = traj.xs.col(k);
    const Input uk = traj.us.col(k);
    StateJacobian Ak;
    InputJacobian Bk;
    jacobians(xk, uk, p, Ak, Bk);
    try {
      sched.K.push_back(lqr_gain(Ak, Bk, w));
    } catch (const CareError& e) {
      std::ostringstream msg;
      msg << "linearize_schedule: knot " << k << ": " << e.what();
      throw CareError(e.kind(), msg.str());
    }
    sched.t.push_back(k * traj.dt);
    sched.A.push_back(Ak);
    sched.B.push_back(Bk);
  }
  return sched;
}

GainSchedule hover_gain(const PlantParams& p, const LqrWeights& w) {
  StateJacobian A;
  InputJacobian B;
  jacobians(hover_state(), hover_input(p), p, A, B);
  GainSchedule sched;
  sched.hover = true;
  sched.t.push_back(0.0);
  sched.A.push_back(A);
  sched.B.push_back(B);
  sched.K.push_back(lqr_gain(A, B, w));
  return sched;
}

Input lbfsf_control(double t, const State& x,
                    const trajopt::OptimalTrajectory& traj,
                    const GainSchedule& sched) {
  const int k = traj.knot_index(t);
  const State x_star = traj.xs.col(k);
  const Gain& K =
      sched.hover ? sched.K[0] : sched.K[std::min(k, sched.size() - 1)];
  return K * (x_star - x);
}

}  // namespace bicopter::lqr
