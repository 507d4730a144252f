#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace digdec {

struct BarrierOptions {
  double tolerance = 1e-8;  ///< target (K + n) / t
  double t_init = 1.0;
  double growth = 16.0;
  int max_newton = 600;
  double newton_eps = 1e-10;
};

struct BarrierResult {
  Eigen::VectorXd nu;       ///< maximizer over the simplex
  Eigen::VectorXd weights;  ///< normalized multipliers of the pieces
  double level = 0.0;       ///< min_k A_k(nu)
  double bound = 0.0;       ///< (K + n) / t at the last centering
  int newton_steps = 0;
  bool converged = false;
};

/**
 * Maximize min_k A_k(nu) over the probability simplex, each A_k concave and
 * twice differentiable in the interior.
 *
 * Log-barrier path following on (nu, z):
 *   minimize  -t z - sum_k log(A_k(nu) - z) - sum_i log nu_i  s.t. sum nu = 1,
 * with equality-constrained Newton steps. At a central point the normalized
 * multipliers 1/(t (A_k - z)) form the minimizing mixture over pieces.
 *
 * `Obj` provides dim(), num_pieces(), value(k, nu) and
 * evaluate(k, nu, val, grad, hess).
 */
template <class Obj>
BarrierResult maximize_min(const Obj& obj, const BarrierOptions& opt = {},
                           const Eigen::VectorXd* start = nullptr) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int n = obj.dim();
  const int K = obj.num_pieces();
  const double m = K + n;

  VectorXd nu = VectorXd::Constant(n, 1.0 / n);
  if (start) {
    nu = 0.9 * start->cwiseMax(0.0) + 0.1 * nu;
    nu /= nu.sum();
  }
  VectorXd vals(K);
  auto all_values = [&](const VectorXd& x, VectorXd& out) {
    for (int k = 0; k < K; ++k) out(k) = obj.value(k, x);
  };
  all_values(nu, vals);
  double z = vals.minCoeff() - 1.0;
  double t = opt.t_init;

  std::vector<VectorXd> grads(K, VectorXd(n));
  std::vector<MatrixXd> hess(K, MatrixXd(n, n));
  MatrixXd kkt(n + 2, n + 2);
  VectorXd rhs(n + 2), sol(n + 2), g(n + 1), dx(n + 1), trial(n), trial_vals(K);
  Eigen::PartialPivLU<MatrixXd> lu(n + 2);
  BarrierResult res;

  while (true) {
    for (int it = 0; it < 100 && res.newton_steps < opt.max_newton; ++it) {
      for (int k = 0; k < K; ++k) obj.evaluate(k, nu, vals(k), grads[k], hess[k]);
      kkt.setZero();
      g.setZero();
      g(n) = -t;
      for (int i = 0; i < n; ++i) {
        g(i) = -1.0 / nu(i);
        kkt(i, i) = 1.0 / (nu(i) * nu(i));
      }
      for (int k = 0; k < K; ++k) {
        double s = vals(k) - z;
        double is = 1.0 / s, is2 = is * is;
        g.head(n) -= is * grads[k];
        g(n) += is;
        kkt.topLeftCorner(n, n).noalias() += is2 * grads[k] * grads[k].transpose();
        kkt.topLeftCorner(n, n) -= is * hess[k];
        kkt.block(0, n, n, 1) -= is2 * grads[k];
        kkt(n, n) += is2;
      }
      kkt.block(n, 0, 1, n) = kkt.block(0, n, n, 1).transpose();
      kkt.block(0, n + 1, n, 1).setOnes();
      kkt.block(n + 1, 0, 1, n).setOnes();
      rhs.head(n + 1) = -g;
      rhs(n + 1) = 0.0;
      lu.compute(kkt);
      sol = lu.solve(rhs);
      dx = sol.head(n + 1);
      double dec = -g.dot(dx);
      if (!(dec > 2.0 * opt.newton_eps)) break;

      // Backtrack to feasibility, then to sufficient decrease. The change in
      // the barrier is accumulated term by term to avoid cancellation.
      double step = 1.0;
      for (int i = 0; i < n; ++i)
        if (dx(i) < 0.0) step = std::min(step, -0.99 * nu(i) / dx(i));
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
        trial = nu + step * dx.head(n);
        if (trial.minCoeff() <= 0.0) continue;
        double zt = z + step * dx(n);
        bool feasible = true;
        double delta = -t * step * dx(n);
        for (int k = 0; k < K && feasible; ++k) {
          trial_vals(k) = obj.value(k, trial);
          double s_new = trial_vals(k) - zt, s_old = vals(k) - z;
          if (!(s_new > 0.0)) feasible = false;
          else delta -= std::log(s_new / s_old);
        }
        if (!feasible) continue;
        for (int i = 0; i < n; ++i) delta -= std::log(trial(i) / nu(i));
        if (delta <= -0.25 * step * dec || (step < 1e-10 && delta <= 0.0)) {
          nu = trial;
          z = zt;
          moved = true;
          break;
        }
      }
      ++res.newton_steps;
      if (!moved) break;
    }
    if (m / t <= opt.tolerance || res.newton_steps >= opt.max_newton) break;
    t *= opt.growth;
  }

  all_values(nu, vals);
  VectorXd w(K);
  for (int k = 0; k < K; ++k) w(k) = 1.0 / (t * std::max(vals(k) - z, 1e-300));
  res.weights = w / w.sum();
  res.nu = nu / nu.sum();
  res.level = vals.minCoeff();
  res.bound = m / t;
  res.converged = m / t <= opt.tolerance;
  return res;
}

/// Single concave piece sum_k w_k A_k, for best responses to a mixture.
template <class Obj>
class WeightedPieces {
 public:
  WeightedPieces(const Obj& obj, const Eigen::VectorXd& weights) : obj_(obj) {
    for (int k = 0; k < weights.size(); ++k)
      if (weights(k) > 0.0) {
        idx_.push_back(k);
        w_.push_back(weights(k));
      }
  }

  int dim() const { return obj_.dim(); }
  int num_pieces() const { return 1; }

  double value(int, const Eigen::VectorXd& nu) const {
    double v = 0.0;
    for (std::size_t i = 0; i < idx_.size(); ++i) v += w_[i] * obj_.value(idx_[i], nu);
    return v;
  }

  void evaluate(int, const Eigen::VectorXd& nu, double& val, Eigen::VectorXd& grad,
                Eigen::MatrixXd& hess) const {
    val = 0.0;
    grad.setZero(nu.size());
    hess.setZero(nu.size(), nu.size());
    double v;
    g_.resize(nu.size());
    h_.resize(nu.size(), nu.size());
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      obj_.evaluate(idx_[i], nu, v, g_, h_);
      val += w_[i] * v;
      grad += w_[i] * g_;
      hess += w_[i] * h_;
    }
  }

 private:
  const Obj& obj_;
  std::vector<int> idx_;
  std::vector<double> w_;
  mutable Eigen::VectorXd g_;
  mutable Eigen::MatrixXd h_;
};

}  // namespace digdec
