#include "bicopter/arma.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "bicopter/sim.hpp"

namespace bicopter::arma {

int regressor_length(int l_w, int n_u, int n_y) { return l_w * (n_u + n_y); }

ArmaController make_controller(int l_w, int n_u, int n_y) {
  if (l_w < 1 || n_u < 1 || n_y < 1) {
    throw std::invalid_argument("make_controller: dimensions must be positive");
  }
  ArmaController c;
  c.l_w = l_w;
  c.n_u = n_u;
  c.n_y = n_y;
  c.theta = MatrixXd::Zero(regressor_length(l_w, n_u, n_y), n_u);
  reset(c);
  return c;
}

void reset(ArmaController& c) {
  c.hist_u.assign(c.l_w, VectorXd::Zero(c.n_u));
  c.hist_y.assign(c.l_w, VectorXd::Zero(c.n_y));
}

VectorXd regressor(const std::deque<VectorXd>& hist_u,
                   const std::deque<VectorXd>& hist_y) {
  Eigen::Index len = 0;
  for (const auto& u : hist_u) len += u.size();
  for (const auto& y : hist_y) len += y.size();
  VectorXd phi(len);
  Eigen::Index at = 0;
  for (const auto& u : hist_u) {
    phi.segment(at, u.size()) = u;
    at += u.size();
  }
  for (const auto& y : hist_y) {
    phi.segment(at, y.size()) = y;
    at += y.size();
  }
  return phi;
}

VectorXd arma_step(ArmaController& c, const VectorXd& y_k) {
  if (y_k.size() != c.n_y) {
    throw std::invalid_argument("arma_step: measurement dimension mismatch");
  }
  if (static_cast<int>(c.hist_u.size()) != c.l_w ||
      static_cast<int>(c.hist_y.size()) != c.l_w) {
    throw std::invalid_argument("arma_step: histories not initialized");
  }
  const VectorXd phi = regressor(c.hist_u, c.hist_y);
  if (c.theta.rows() != phi.size() || c.theta.cols() != c.n_u) {
    throw std::invalid_argument("arma_step: theta dimension mismatch");
  }
  VectorXd u = c.theta.transpose() * phi;
  c.hist_u.pop_back();
  c.hist_u.push_front(u);
  c.hist_y.pop_back();
  c.hist_y.push_front(y_k);
  return u;
}

TrainingDataset generate_training_data(const trajopt::OptimalTrajectory& traj,
                                       const lqr::GainSchedule& sched,
                                       int n_runs, std::uint64_t seed,
                                       double ic_halfwidth, double T_s,
                                       double horizon, int l_w,
                                       bool position_emits_both,
                                       const PlantParams& p) {
  if (n_runs < 0) {
    throw std::invalid_argument("generate_training_data: n_runs must be >= 0");
  }
  if (ic_halfwidth < 0.0) {
    throw std::invalid_argument(
        "generate_training_data: ic_halfwidth must be >= 0");
  }
  if (l_w < 1) {
    throw std::invalid_argument("generate_training_data: l_w must be >= 1");
  }
  const int pos_nu = position_emits_both ? 2 : 1;
  const int pos_len = regressor_length(l_w, pos_nu, 2);
  const int ang_len = regressor_length(l_w, 1, 1);

  TrainingDataset ds;
  ds.n_runs = n_runs;
  ds.seed = seed;
  ds.T_s = T_s;
  ds.l_w = l_w;
  ds.position_emits_both = position_emits_both;

  sim::SimScenario scenario;
  scenario.mode = sim::Mode::kLbfsf;
  scenario.traj = traj;
  scenario.sched = sched;
  scenario.plant = p;
  scenario.T_s = T_s;
  scenario.horizon = horizon;

  for (int run = 0; run < n_runs; ++run) {
    std::mt19937_64 eng(sim::derive_seed(seed, run));
    for (int i = 0; i < kStateDim; ++i) {
      scenario.x0[i] = ic_halfwidth * (2.0 * sim::uniform01(eng) - 1.0);
    }
    scenario.seed = sim::derive_seed(seed, run);
    const sim::SimResult res = sim::simulate(scenario);

    double worst = 0.0;
    for (const auto& row : res.log) {
      worst = std::max(worst, row.x.cwiseAbs().maxCoeff());
    }
    if (res.diverged || worst > 1e3) {
      ++ds.excluded;
      continue;
    }

    // Teacher forcing: regressors are built from the logged feedback signals
    // of this run, never across run boundaries. The log's final tick only
    // closes the last interval and contributes no sample; the first l_w
    // samples are zero-padded warmup and are dropped.
    const long samples = static_cast<long>(res.log.size()) - 1;
    const long rows = std::max<long>(0, samples - l_w);
    TrainingRun tr;
    tr.phi_pos.resize(rows, pos_len);
    tr.tgt_pos.resize(rows, pos_nu);
    if (!position_emits_both) {
      tr.phi_ang.resize(rows, ang_len);
      tr.tgt_ang.resize(rows, 1);
    }

    std::deque<VectorXd> hu_pos(l_w, VectorXd::Zero(pos_nu));
    std::deque<VectorXd> hy_pos(l_w, VectorXd::Zero(2));
    std::deque<VectorXd> hu_ang(l_w, VectorXd::Zero(1));
    std::deque<VectorXd> hy_ang(l_w, VectorXd::Zero(1));

    long at = 0;
    for (long k = 0; k < samples; ++k) {
      const auto& row = res.log[k];
      VectorXd y_pos(2);
      y_pos << row.x[kR1] - row.x_ref[kR1], row.x[kR2] - row.x_ref[kR2];
      VectorXd y_ang(1);
      y_ang << row.x[kPsi] - row.x_ref[kPsi];
      VectorXd u_pos(pos_nu);
      if (position_emits_both) {
        u_pos << row.u_fb[kUT], row.u_fb[kUR];
      } else {
        u_pos << row.u_fb[kUT];
      }
      VectorXd u_ang(1);
      u_ang << row.u_fb[kUR];

      if (k >= l_w) {
        tr.phi_pos.row(at) = regressor(hu_pos, hy_pos).transpose();
        tr.tgt_pos.row(at) = u_pos.transpose();
        if (!position_emits_both) {
          tr.phi_ang.row(at) = regressor(hu_ang, hy_ang).transpose();
          tr.tgt_ang.row(at) = u_ang.transpose();
        }
        ++at;
      }
      hu_pos.pop_back();
      hu_pos.push_front(u_pos);
      hy_pos.pop_back();
      hy_pos.push_front(y_pos);
      hu_ang.pop_back();
      hu_ang.push_front(u_ang);
      hy_ang.pop_back();
      hy_ang.push_front(y_ang);
    }
    ds.runs.push_back(std::move(tr));
  }
  return ds;
}

namespace {

struct ChannelFit {
  MatrixXd theta;
  double rms = 0.0;
  double grad = 0.0;
};

// Normal equations (G + ridge I) theta = b with iterative refinement until
// the ridge-objective gradient 2|(G + ridge I) theta - b| is at machine floor.
ChannelFit fit_channel(const std::vector<const MatrixXd*>& phis,
                       const std::vector<const MatrixXd*>& tgts, double ridge,
                       const char* name) {
  const Eigen::Index p = phis.empty() ? 0 : (*phis[0]).cols();
  const Eigen::Index m = tgts.empty() ? 0 : (*tgts[0]).cols();
  long rows = 0;
  for (const auto* phi : phis) rows += phi->rows();
  if (rows < p || p == 0) {
    std::ostringstream msg;
    msg << "fit_theta: " << name << " has " << rows
        << " rows for regressor length " << p;
    throw DegenerateData(msg.str());
  }

  MatrixXd G = MatrixXd::Zero(p, p);
  MatrixXd b = MatrixXd::Zero(p, m);
  for (size_t i = 0; i < phis.size(); ++i) {
    G.noalias() += phis[i]->transpose() * (*phis[i]);
    b.noalias() += phis[i]->transpose() * (*tgts[i]);
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double floor = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
  if (es.eigenvalues().minCoeff() + ridge <= floor) {
    std::ostringstream msg;
    msg << "fit_theta: " << name
        << " Gram matrix is rank-deficient below the ridge floor";
    throw DegenerateData(msg.str());
  }

  const MatrixXd Greg = G + ridge * MatrixXd::Identity(p, p);
  Eigen::LDLT<MatrixXd> ldlt(Greg);
  if (ldlt.info() != Eigen::Success) {
    throw DegenerateData(std::string("fit_theta: factorization failed for ") +
                         name);
  }

  ChannelFit fit;
  fit.theta = ldlt.solve(b);
  double grad = 2.0 * (Greg * fit.theta - b).norm();
  for (int it = 0; it < 50 && grad > 1e-9; ++it) {
    const MatrixXd corr = ldlt.solve(b - Greg * fit.theta);
    const MatrixXd cand = fit.theta + corr;
    const double cand_grad = 2.0 * (Greg * cand - b).norm();
    if (!(cand_grad < grad)) break;
    fit.theta = cand;
    grad = cand_grad;
  }
  fit.grad = grad;

  double sq = 0.0;
  for (size_t i = 0; i < phis.size(); ++i) {
    sq += ((*tgts[i]) - (*phis[i]) * fit.theta).squaredNorm();
  }
  fit.rms = std::sqrt(sq / (rows * m));
  return fit;
}

}  // namespace

FitResult fit_theta(const TrainingDataset& ds, int l_w, double ridge) {
  if (l_w != ds.l_w) {
    throw std::invalid_argument("fit_theta: window length does not match data");
  }
  if (ridge < 0.0) {
    throw std::invalid_argument("fit_theta: ridge must be >= 0");
  }

  std::vector<const MatrixXd*> phi_pos, tgt_pos, phi_ang, tgt_ang;
  long rows = 0;
  for (const auto& run : ds.runs) {
    if (run.phi_pos.rows() == 0) continue;
    phi_pos.push_back(&run.phi_pos);
    tgt_pos.push_back(&run.tgt_pos);
    if (!ds.position_emits_both) {
      phi_ang.push_back(&run.phi_ang);
      tgt_ang.push_back(&run.tgt_ang);
    }
    rows += run.phi_pos.rows();
  }
  if (rows == 0) {
    throw DegenerateData("fit_theta: dataset has no training rows");
  }

  FitResult out;
  out.rows = rows;
  const ChannelFit pos = fit_channel(phi_pos, tgt_pos, ridge, "position");
  out.theta_pos = pos.theta;
  out.rms_pos = pos.rms;
  out.grad_pos = pos.grad;
  if (!ds.position_emits_both) {
    const ChannelFit ang = fit_channel(phi_ang, tgt_ang, ridge, "angle");
    out.theta_ang = ang.theta;
    out.rms_ang = ang.rms;
    out.grad_ang = ang.grad;
  }
  return out;
}

}  // namespace bicopter::arma
