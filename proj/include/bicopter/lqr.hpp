#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "bicopter/dynamics.hpp"
#include "bicopter/trajopt.hpp"

namespace bicopter::lqr {

using Eigen::MatrixXd;

using Gain = Eigen::Matrix<double, kInputDim, kStateDim>;

// Q := R1 (state), R := R2 (input); named to avoid colliding with the
// transcription weights Q_x, Q_u.
struct LqrWeights {
  MatrixXd R1 = MatrixXd::Identity(kStateDim, kStateDim);
  MatrixXd R2 = MatrixXd::Identity(kInputDim, kInputDim);
};

class CareError : public std::runtime_error {
 public:
  enum class Kind { kNotStabilizable, kIllConditioned };
  CareError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Stabilizing solution of A'P + PA - PB R^-1 B'P + Q = 0 via the stable
// invariant subspace of the Hamiltonian, refined by Kleinman-Newton steps to
// relative residual <= 1e-8. Throws CareError on failure.
MatrixXd solve_care(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                    const MatrixXd& R);

// Relative residual |A'P + PA - PBR^-1B'P + Q|_F / max(1, |P|_F).
double care_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P);

// K = R2^-1 B' P with feedback convention u_fb = K (x* - x), closed loop A - BK.
MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const LqrWeights& w);

bool is_hurwitz(const MatrixXd& M, double margin = 0.0);

// Per-knot linearizations and gains along a trajectory; length 1 with
// hover = true when built by hover_gain.
struct GainSchedule {
  std::vector<double> t;
  std::vector<StateJacobian> A;
  std::vector<InputJacobian> B;
  std::vector<Gain> K;
  bool hover = false;

  int size() const { return static_cast<int>(K.size()); }
};

GainSchedule linearize_schedule(const trajopt::OptimalTrajectory& traj,
                                const LqrWeights& w,
                                const PlantParams& p = {});

GainSchedule hover_gain(const PlantParams& p = {}, const LqrWeights& w = {});

// u_fb = K_k (x*(t) - x) with k = min(floor(t/dt), N) under zero-order hold;
// hover schedules always use their single gain.
Input lbfsf_control(double t, const State& x,
                    const trajopt::OptimalTrajectory& traj,
                    const GainSchedule& sched);

}  // namespace bicopter::lqr
