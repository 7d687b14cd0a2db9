#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <bicopter/lqr.hpp>
#include <bicopter/sim.hpp>
#include <bicopter/trajopt.hpp>

namespace bicopter::io {

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Doubles are rendered with 17 significant digits so that every write/read
// round-trip reproduces the exact bit pattern.
std::string format_double(double v);
bool try_parse_double(const std::string& s, double& out);
bool try_parse_long(const std::string& s, long& out);
bool try_parse_u64(const std::string& s, std::uint64_t& out);

struct TrajectoryFile {
  trajopt::OptimalTrajectory traj;
  double eq_tol = 0.0;
  double stat_tol = 0.0;
};

// Comma-separated knot table (header `k,t,r1,v1,r2,v2,psi,omega,uT,uR`) with
// a `#` preamble carrying N, T_star, dt, the solver tolerances the trajectory
// was produced under, and the achieved feasibility/objective.
void write_trajectory(const std::string& path,
                      const trajopt::OptimalTrajectory& traj, double eq_tol,
                      double stat_tol);
TrajectoryFile read_trajectory(const std::string& path);

struct GainScheduleFile {
  // A and B are not stored on disk; the reader leaves them empty.  Control
  // evaluation only needs t, K, and the hover flag.
  lqr::GainSchedule sched;
  lqr::LqrWeights weights;
};

// Comma-separated record table (header `k,t,K11..K26`, gains row-major) with
// a `#` preamble carrying the record count, hover flag, and LQR weights.
void write_gain_schedule(const std::string& path,
                         const lqr::GainSchedule& sched,
                         const lqr::LqrWeights& weights);
GainScheduleFile read_gain_schedule(const std::string& path);

struct ArmaModelFile {
  int l_w = 0;
  bool position_emits_both = false;
  int n_runs = 0;
  std::uint64_t seed = 0;
  double ridge = 0.0;
  long rows = 0;
  Eigen::MatrixXd theta_pos;  // regressor_length(l_w, pos_n_u, 2) x pos_n_u
  Eigen::MatrixXd theta_ang;  // empty when position_emits_both
  double rms_pos = 0.0;
  double grad_pos = 0.0;
  double rms_ang = 0.0;
  double grad_ang = 0.0;
};

// Key-value text: window length, training settings, per-controller
// dimensions, fit diagnostics, and theta entries listed row-major.
void write_arma_model(const std::string& path, const ArmaModelFile& m);
ArmaModelFile read_arma_model(const std::string& path);

// Comma-separated tick table (pinned 21-column header, s-suffix = reference)
// with a `#` preamble carrying t_star and the divergence flag.  Metrics are
// recomputed on read; they are a pure function of the stored rows.
void write_sim_log(const std::string& path, const sim::SimResult& r);
sim::SimResult read_sim_log(const std::string& path);

}  // namespace bicopter::io
