#include "bicopter/box_lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bicopter::opt {

namespace {

using Eigen::VectorXd;

double projected_gradient_norm(const VectorXd& x, const VectorXd& g,
                               const VectorXd& lo, const VectorXd& hi) {
  double n = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = x[i] - std::clamp(x[i] - g[i], lo[i], hi[i]);
    n = std::max(n, std::abs(step));
  }
  return n;
}

// Zero the gradient on binding bounds (at the bound with the gradient pushing
// outward); quasi-Newton directions are built from the free variables only.
void mask_binding(const VectorXd& x, const VectorXd& g, const VectorXd& lo,
                  const VectorXd& hi, VectorXd& gm) {
  gm = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= lo[i] && g[i] >= 0.0) || (x[i] >= hi[i] && g[i] <= 0.0)) {
      gm[i] = 0.0;
    }
  }
}

class LbfgsMemory {
 public:
  explicit LbfgsMemory(int capacity) : capacity_(capacity) {}

  void clear() {
    s_.clear();
    y_.clear();
    rho_.clear();
  }
  bool empty() const { return s_.empty(); }

  void push(const VectorXd& s, const VectorXd& y) {
    const double sy = s.dot(y);
    if (sy <= 1e-10 * s.norm() * y.norm()) return;  // curvature skip
    if (static_cast<int>(s_.size()) == capacity_) {
      s_.erase(s_.begin());
      y_.erase(y_.begin());
      rho_.erase(rho_.begin());
    }
    s_.push_back(s);
    y_.push_back(y);
    rho_.push_back(1.0 / sy);
  }

  // Two-loop recursion: d = -H*g with H0 = gamma*I from the newest pair.
  void apply(const VectorXd& g, VectorXd& d) const {
    d = -g;
    if (s_.empty()) return;
    const int k = static_cast<int>(s_.size());
    std::vector<double> alpha(k);
    for (int j = k - 1; j >= 0; --j) {
      alpha[j] = rho_[j] * s_[j].dot(d);
      d.noalias() -= alpha[j] * y_[j];
    }
    const double gamma = 1.0 / (rho_.back() * y_.back().squaredNorm());
    d *= gamma;
    for (int j = 0; j < k; ++j) {
      const double beta = rho_[j] * y_[j].dot(d);
      d.noalias() += (alpha[j] - beta) * s_[j];
    }
  }

 private:
  int capacity_;
  std::vector<VectorXd> s_, y_;
  std::vector<double> rho_;
};

}  // namespace

BoxLbfgsResult minimize_box(const ObjectiveFn& fg, VectorXd x0,
                            const VectorXd& lower, const VectorXd& upper,
                            const BoxLbfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("minimize_box: bound size mismatch");
  }
  if ((lower.array() > upper.array()).any()) {
    throw std::invalid_argument("minimize_box: lower > upper");
  }

  BoxLbfgsResult res;
  VectorXd x = x0.cwiseMax(lower).cwiseMin(upper);
  VectorXd g(n), gm(n), d(n), xt(n), gt(n), dx(n);
  double f = fg(x, g);
  res.evals = 1;

  LbfgsMemory mem(std::max(1, opts.memory));

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    res.pg_norm = projected_gradient_norm(x, g, lower, upper);
    if (res.pg_norm <= opts.grad_tol) {
      res.status = BoxLbfgsStatus::kConverged;
      break;
    }

    mask_binding(x, g, lower, upper, gm);

    // Backtracking Armijo along the projected arc. On success xt/gt/ft hold
    // the accepted point.
    double ft = f;
    auto search = [&](const VectorXd& dir) -> bool {
      double alpha = 1.0;
      for (int bt = 0; bt < opts.max_backtracks; ++bt) {
        xt = (x + alpha * dir).cwiseMax(lower).cwiseMin(upper);
        dx = xt - x;
        if (dx.lpNorm<Eigen::Infinity>() == 0.0) return false;
        ft = fg(xt, gt);
        ++res.evals;
        const double gdx = g.dot(dx);
        if (std::isfinite(ft) && gdx < 0.0 && ft <= f + opts.armijo_c * gdx) {
          return true;
        }
        // Safeguarded quadratic interpolation on the step size.
        double next = 0.5 * alpha;
        if (std::isfinite(ft) && gdx < 0.0) {
          const double denom = ft - f - gdx;
          if (denom > 0.0) {
            next =
                std::clamp(-0.5 * gdx * alpha / denom, 0.1 * alpha, 0.5 * alpha);
          }
        }
        alpha = next;
      }
      return false;
    };

    const bool no_pairs = mem.empty();
    mem.apply(gm, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (gm[i] == 0.0) d[i] = 0.0;  // keep binding variables put
    }
    if (no_pairs) {
      const double gi = d.lpNorm<Eigen::Infinity>();
      if (gi > 1.0) d /= gi;  // conservative first step
    }

    bool ok = g.dot(d) < 0.0 && search(d);
    if (!ok && !no_pairs) {
      // Fall back to projected steepest descent with fresh memory.
      mem.clear();
      d = -gm;
      const double gi = d.lpNorm<Eigen::Infinity>();
      if (gi > 1.0) d /= gi;
      ok = g.dot(d) < 0.0 && search(d);
    }
    if (!ok) {
      res.status = BoxLbfgsStatus::kLineSearchFailed;
      break;
    }

    mem.push(xt - x, gt - g);
    x.swap(xt);
    g.swap(gt);
    f = ft;
    res.iters = iter + 1;
  }

  res.x = std::move(x);
  res.grad = std::move(g);
  res.f = f;
  res.pg_norm = projected_gradient_norm(res.x, res.grad, lower, upper);
  return res;
}

}  // namespace bicopter::opt
