#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "digdec/barrier.hpp"
#include "digdec/divergences.hpp"
#include "digdec/errors.hpp"
#include "digdec/problem.hpp"

namespace digdec {

inline constexpr double kRhoFloor = 1e-12;

struct SaddleConfig {
  double gap_tolerance = 1e-4;
  double barrier_tolerance = 1e-8;
  int max_iters = 600;        ///< Newton steps per barrier solve
  int restarts = 1;           ///< starts for best_response_world
  int grid_resolution = 20;   ///< 1/h for rho grids in estimate_digdec
  BarrierOptions barrier() const {
    BarrierOptions o;
    o.tolerance = barrier_tolerance;
    o.max_newton = max_iters;
    return o;
  }
};

struct SaddlePoint {
  std::vector<double> p;
  std::vector<double> nu;
  double air_value = 0.0;  ///< objective at (p, nu)
  double lower = 0.0;      ///< min_pi objective(delta_pi, nu)
  double upper = 0.0;      ///< certified bound on max_nu objective(p, nu)
  double gap = 0.0;
  int iterations = 0;
  bool gap_met = false;
};

/**
 * Dig-DEC objective split by policy: A_pi(nu) = <c_pi, nu> - K_pi(nu)/eta with
 *   c_pi(psi) = V_psi(pi*_psi) - V_psi(pi) - (1/eta) E_{phi~rho} Dbar^pi(phi||M_psi)
 *   K_pi(nu)  = E_{psi~nu} E_o KL(nu_phi(.|pi,o), rho~),
 * where rho~ is rho floored at kRhoFloor (KL argument only).
 */
class AirObjective {
 public:
  AirObjective(const DecisionProblem& prob, std::span<const double> rho, double eta,
               DivergenceMode mode, double floor = kRhoFloor)
      : prob_(prob), eta_(eta) {
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    require_distribution(rho, "rho");
    const int n = prob.num_world_points();
    const auto& dbar = prob.divergence(mode);
    log_rho_.resize(prob.num_infosets());
    for (int phi = 0; phi < prob.num_infosets(); ++phi) log_rho_[phi] = std::log(std::max(rho[phi], floor));
    for (int pi = 0; pi < prob.num_policies(); ++pi) {
      Eigen::VectorXd c = prob.regret(pi);
      const auto& T = dbar.policy_table(pi);
      for (int k = 0; k < n; ++k) {
        int m = prob.partition().world_point(k).model;
        double d = 0.0;
        for (int phi = 0; phi < prob.num_infosets(); ++phi) d += rho[phi] * T(phi, m);
        c(k) -= d / eta;
      }
      linear_.push_back(std::move(c));
    }
  }

  int dim() const { return prob_.num_world_points(); }
  int num_pieces() const { return prob_.num_policies(); }

  double kl_term(int pi, const Eigen::VectorXd& nu) const {
    const auto& L = prob_.likelihood(pi);
    W_.noalias() = L.transpose() * nu;
    double s = 0.0;
    for (int phi = 0; phi < prob_.num_infosets(); ++phi) {
      auto [b, len] = prob_.block(phi);
      if (len == 0) continue;
      w_.noalias() = L.middleRows(b, len).transpose() * nu.segment(b, len);
      for (Eigen::Index o = 0; o < w_.size(); ++o)
        if (w_(o) > 0.0) s += w_(o) * (std::log(w_(o) / W_(o)) - log_rho_[phi]);
    }
    return s;
  }

  double value(int pi, const Eigen::VectorXd& nu) const {
    return linear_[pi].dot(nu) - kl_term(pi, nu) / eta_;
  }

  void evaluate(int pi, const Eigen::VectorXd& nu, double& val, Eigen::VectorXd& grad,
                Eigen::MatrixXd& hess) const {
    const auto& L = prob_.likelihood(pi);
    const Eigen::Index O = L.cols();
    auto& W = W_;
    auto& w = w_;
    auto& lt = lt_;
    auto& invw = invw_;
    W.noalias() = L.transpose() * nu;
    invW_ = W.unaryExpr([](double x) { return x > 0.0 ? 1.0 / x : 0.0; });
    double kl = 0.0;
    grad.setZero(nu.size());
    hess.noalias() = -(L * invW_.asDiagonal() * L.transpose());
    lt.resize(O);
    invw.resize(O);
    for (int phi = 0; phi < prob_.num_infosets(); ++phi) {
      auto [b, len] = prob_.block(phi);
      if (len == 0) continue;
      auto Lb = L.middleRows(b, len);
      w.noalias() = Lb.transpose() * nu.segment(b, len);
      for (Eigen::Index o = 0; o < O; ++o) {
        if (w(o) > 0.0) {
          lt(o) = std::log(w(o) / W(o)) - log_rho_[phi];
          invw(o) = 1.0 / w(o);
          kl += w(o) * lt(o);
        } else {
          lt(o) = 0.0;
          invw(o) = 0.0;
        }
      }
      grad.segment(b, len).noalias() = Lb * lt;
      hess.block(b, b, len, len).noalias() += Lb * invw.asDiagonal() * Lb.transpose();
    }
    // Derivatives of K; flip to the objective.
    val = linear_[pi].dot(nu) - kl / eta_;
    grad = linear_[pi] - grad / eta_;
    hess /= -eta_;
  }

 private:
  const DecisionProblem& prob_;
  double eta_;
  std::vector<double> log_rho_;
  std::vector<Eigen::VectorXd> linear_;
  mutable Eigen::VectorXd W_, invW_, w_, lt_, invw_;  // scratch
};

/**
 * Optimistic objective, linear in nu:
 *   O_pi(nu) = sum_psi nu(psi) [ E_{phi~rho}(V_phi(pi_phi) - Dbar^pi(phi||M_psi)/eta) - V_psi(pi) ].
 */
class OptimisticObjective {
 public:
  OptimisticObjective(const DecisionProblem& prob, std::span<const double> rho, double eta,
                      DivergenceMode mode)
      : n_(prob.num_world_points()) {
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    if (prob.env().setting() != Setting::stochastic)
      throw InvalidArgument("the optimistic rule is defined for stochastic instances");
    require_distribution(rho, "rho");
    const auto& dbar = prob.divergence(mode);
    double vbar = 0.0;
    for (int phi = 0; phi < prob.num_infosets(); ++phi) vbar += rho[phi] * prob.partition().infoset(phi).value;
    for (int pi = 0; pi < prob.num_policies(); ++pi) {
      Eigen::VectorXd c(n_);
      const auto& T = dbar.policy_table(pi);
      for (int k = 0; k < n_; ++k) {
        int m = prob.partition().world_point(k).model;
        double d = 0.0;
        for (int phi = 0; phi < prob.num_infosets(); ++phi) d += rho[phi] * T(phi, m);
        c(k) = vbar - d / eta - prob.env().value(m, pi);
      }
      linear_.push_back(std::move(c));
    }
  }

  int dim() const { return n_; }
  int num_pieces() const { return static_cast<int>(linear_.size()); }
  double value(int pi, const Eigen::VectorXd& nu) const { return linear_[pi].dot(nu); }
  void evaluate(int pi, const Eigen::VectorXd& nu, double& val, Eigen::VectorXd& grad,
                Eigen::MatrixXd& hess) const {
    val = linear_[pi].dot(nu);
    grad = linear_[pi];
    hess.setZero(nu.size(), nu.size());
  }

 private:
  int n_;
  std::vector<Eigen::VectorXd> linear_;
};

/// Exact AIR(p, nu; rho) with the unfloored rho; nullopt when D is infinite (payoff -inf).
inline std::optional<double> air_value(const DecisionProblem& prob, std::span<const double> p,
                                       std::span<const double> nu, std::span<const double> rho,
                                       double eta, DivergenceMode mode) {
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  const auto& dbar = prob.divergence(mode);
  double total = 0.0;
  for (int pi = 0; pi < prob.num_policies(); ++pi) {
    if (p[pi] == 0.0) continue;
    double gain = 0.0;
    for (int k = 0; k < prob.num_world_points(); ++k) gain += nu[k] * prob.regret(pi)(k);
    KlValue D = combined_divergence(prob.env(), prob.partition(), dbar, nu, rho, pi);
    if (D.is_infinite()) return std::nullopt;
    total += p[pi] * (gain - D.value() / eta);
  }
  return total;
}

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class Obj>
SaddlePoint solve_pieces(const Obj& obj, const SaddleConfig& cfg) {
  auto opt = cfg.barrier();
  BarrierResult r = maximize_min(obj, opt);
  SaddlePoint sp;
  sp.p = to_std(r.weights);
  sp.nu = to_std(r.nu);
  sp.iterations = r.newton_steps;
  double lower = std::numeric_limits<double>::infinity(), air = 0.0;
  for (int k = 0; k < obj.num_pieces(); ++k) {
    double v = obj.value(k, r.nu);
    lower = std::min(lower, v);
    air += r.weights(k) * v;
  }
  WeightedPieces<Obj> mix(obj, r.weights);
  // The certificate only has to resolve the gap tolerance; its bound is added to `upper`.
  BarrierOptions cert = opt;
  cert.tolerance = std::max(opt.tolerance, 0.1 * cfg.gap_tolerance);
  BarrierResult br = maximize_min(mix, cert, &r.nu);
  sp.iterations += br.newton_steps;
  sp.lower = lower;
  sp.upper = mix.value(0, br.nu) + br.bound;
  sp.air_value = air;
  sp.gap = std::max(0.0, sp.upper - sp.lower);
  sp.gap_met = sp.gap <= cfg.gap_tolerance;
  return sp;
}

}  // namespace detail

/// argmin_pi AIR(delta_pi, nu; rho); ties go to the lowest policy id.
inline std::pair<int, double> best_response_policy(const DecisionProblem& prob,
                                                   std::span<const double> nu,
                                                   std::span<const double> rho, double eta,
                                                   DivergenceMode mode) {
  AirObjective obj(prob, rho, eta, mode);
  Eigen::VectorXd v = detail::to_eigen(nu);
  int best = 0;
  double bv = obj.value(0, v);
  for (int pi = 1; pi < prob.num_policies(); ++pi) {
    double x = obj.value(pi, v);
    if (x < bv) {
      bv = x;
      best = pi;
    }
  }
  return {best, bv};
}

struct WorldResponse {
  std::vector<double> nu;
  double value = 0.0;
  double bound = 0.0;         ///< barrier optimality bound
  bool non_improvement = false;  ///< restarts disagreed by more than the gap tolerance
  std::optional<double> grid_value;  ///< brute-force grid maximum, small Psi only
};

namespace detail {

/// Calls fn(nu) for every point of the simplex grid with step 1/res.
inline void for_each_simplex_point(int n, int res, const std::function<void(const Eigen::VectorXd&)>& fn) {
  std::vector<int> c(n, 0);
  Eigen::VectorXd x(n);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == n - 1) {
      c[i] = left;
      for (int j = 0; j < n; ++j) x(j) = static_cast<double>(c[j]) / res;
      fn(x);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      c[i] = v;
      rec(i + 1, left - v);
    }
  };
  rec(0, res);
}

}  // namespace detail

/**
 * argmax_nu AIR(p, nu; rho) over Delta(Psi). Runs `restarts` barrier solves
 * from different starts; for |Psi| <= 4 also scans a simplex grid (step 1e-3
 * up to three points, 1e-2 for four).
 */
inline WorldResponse best_response_world(const DecisionProblem& prob, std::span<const double> p,
                                         std::span<const double> rho, double eta,
                                         DivergenceMode mode, int restarts = 1,
                                         const SaddleConfig& cfg = {}, bool grid_check = false) {
  AirObjective obj(prob, rho, eta, mode);
  WeightedPieces<AirObjective> mix(obj, detail::to_eigen(p));
  const int n = obj.dim();
  WorldResponse out;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Eigen::VectorXd start = Eigen::VectorXd::Constant(n, 1.0 / n);
    if (r > 0) {
      start = Eigen::VectorXd::Constant(n, 0.1 / n);
      start((r - 1) % n) += 0.9;
    }
    BarrierResult br = maximize_min(mix, cfg.barrier(), &start);
    double v = mix.value(0, br.nu);
    lo = std::min(lo, v);
    if (v > hi) {
      hi = v;
      out.nu = detail::to_std(br.nu);
      out.bound = br.bound;
    }
  }
  out.value = hi;
  out.non_improvement = hi - lo > cfg.gap_tolerance;
  if (grid_check && n <= 4) {
    int res = n <= 3 ? 1000 : 100;
    double best = -std::numeric_limits<double>::infinity();
    detail::for_each_simplex_point(n, res, [&](const Eigen::VectorXd& x) {
      best = std::max(best, mix.value(0, x));
    });
    out.grid_value = best;
  }
  return out;
}

/// Saddle point of min_p max_nu AIR(p, nu; rho) with its duality-gap certificate.
inline SaddlePoint solve_minimax(const DecisionProblem& prob, std::span<const double> rho, double eta,
                                 DivergenceMode mode, const SaddleConfig& cfg = {}) {
  AirObjective obj(prob, rho, eta, mode);
  return detail::solve_pieces(obj, cfg);
}

/// Saddle point of the optimistic inner game at a fixed rho.
inline SaddlePoint solve_optimistic(const DecisionProblem& prob, std::span<const double> rho,
                                    double eta, DivergenceMode mode, const SaddleConfig& cfg = {}) {
  OptimisticObjective obj(prob, rho, eta, mode);
  return detail::solve_pieces(obj, cfg);
}

struct DecEstimate {
  double value = 0.0;
  std::vector<double> argmax_rho;
  int resolution = 0;
  double max_gap = 0.0;
};

/// max over a rho-grid (step 1/resolution) of the inner saddle value.
inline DecEstimate estimate_dec(const DecisionProblem& prob, double eta, DivergenceMode mode,
                                bool optimistic, const SaddleConfig& cfg = {}) {
  const int nphi = prob.num_infosets();
  if (nphi > 4) throw CapExceeded("rho grid needs at most 4 infosets, got " + std::to_string(nphi));
  DecEstimate est;
  est.resolution = cfg.grid_resolution;
  est.value = -std::numeric_limits<double>::infinity();
  detail::for_each_simplex_point(nphi, cfg.grid_resolution, [&](const Eigen::VectorXd& r) {
    std::vector<double> rho = detail::to_std(r);
    SaddlePoint sp = optimistic ? solve_optimistic(prob, rho, eta, mode, cfg)
                                : solve_minimax(prob, rho, eta, mode, cfg);
    est.max_gap = std::max(est.max_gap, sp.gap);
    if (sp.air_value > est.value) {
      est.value = sp.air_value;
      est.argmax_rho = rho;
    }
  });
  return est;
}

inline DecEstimate estimate_digdec(const DecisionProblem& prob, double eta, DivergenceMode mode,
                                   const SaddleConfig& cfg = {}) {
  return estimate_dec(prob, eta, mode, false, cfg);
}

inline DecEstimate estimate_odec(const DecisionProblem& prob, double eta, DivergenceMode mode,
                                 const SaddleConfig& cfg = {}) {
  return estimate_dec(prob, eta, mode, true, cfg);
}

}  // namespace digdec
