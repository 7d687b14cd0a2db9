#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "bicopter/dynamics.hpp"
#include "bicopter/lqr.hpp"
#include "bicopter/trajopt.hpp"

namespace bicopter::arma {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Training data cannot identify a model: fewer rows than regressor entries,
// or a Gram matrix that is rank-deficient below the ridge floor.
class DegenerateData : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// u_k = phi_k * theta with phi_k built from the last l_w controls and the
// last l_w measurements. Histories are newest-first and always hold exactly
// l_w entries (zero-padded at start).
struct ArmaController {
  int l_w = 5;
  int n_y = 0;  // measurement dimension consumed
  int n_u = 0;  // control dimension produced
  MatrixXd theta;  // (l_w*n_u + l_w*n_y) x n_u
  std::deque<VectorXd> hist_u;
  std::deque<VectorXd> hist_y;
};

ArmaController make_controller(int l_w, int n_u, int n_y);

int regressor_length(int l_w, int n_u, int n_y);

// Re-zeroes the histories (fresh run), keeping theta.
void reset(ArmaController& c);

// phi = [u_{k-1}, ..., u_{k-l_w}, y_{k-1}, ..., y_{k-l_w}], newest first.
VectorXd regressor(const std::deque<VectorXd>& hist_u,
                   const std::deque<VectorXd>& hist_y);

// Computes u_k from the pre-update histories, then pushes (u_k, y_k); the
// new measurement only enters the next regressor.
VectorXd arma_step(ArmaController& c, const VectorXd& y_k);

// One closed-loop source run: regressor rows (one per retained sample, warmup
// rows dropped) aligned with the teacher's feedback controls.
struct TrainingRun {
  MatrixXd phi_pos;  // rows x regressor_length(l_w, pos_n_u, 2)
  MatrixXd tgt_pos;  // rows x pos_n_u
  MatrixXd phi_ang;  // rows x regressor_length(l_w, 1, 1); empty when the
  MatrixXd tgt_ang;  // position controller emits both channels
};

struct TrainingDataset {
  std::vector<TrainingRun> runs;
  int n_runs = 0;    // requested
  int excluded = 0;  // divergent runs dropped
  std::uint64_t seed = 0;
  double T_s = 0.0;
  int l_w = 0;
  bool position_emits_both = false;
};

// Rolls out the scheduled full-state-feedback loop from n_runs random initial
// states (componentwise uniform on [-ic_halfwidth, ic_halfwidth]) and records
// teacher-forced regressor/target pairs for the two decoupled controllers:
// position [e_r1, e_r2] -> uT correction, angle e_psi -> uR correction (or a
// single two-output position controller when position_emits_both is set).
// Runs whose state norm exceeds 1e3 are excluded and counted.
TrainingDataset generate_training_data(const trajopt::OptimalTrajectory& traj,
                                       const lqr::GainSchedule& sched,
                                       int n_runs, std::uint64_t seed,
                                       double ic_halfwidth, double T_s,
                                       double horizon, int l_w = 5,
                                       bool position_emits_both = false,
                                       const PlantParams& p = {});

struct FitResult {
  MatrixXd theta_pos;
  MatrixXd theta_ang;
  double rms_pos = 0.0;  // training RMS residual per controller
  double rms_ang = 0.0;
  double grad_pos = 0.0;  // ridge-objective gradient norm at the fit
  double grad_ang = 0.0;
  long rows = 0;  // retained rows across all runs
};

// Ridge least squares min_theta sum |u - phi theta|^2 + ridge |theta|^2 via
// normal equations with iterative refinement; throws DegenerateData when the
// data cannot support the fit.
FitResult fit_theta(const TrainingDataset& ds, int l_w, double ridge = 1e-6);

}  // namespace bicopter::arma
