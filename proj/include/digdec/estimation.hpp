#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "digdec/distribution.hpp"
#include "digdec/divergences.hpp"
#include "digdec/errors.hpp"
#include "digdec/problem.hpp"

namespace digdec {

enum class EngineKind { bayes, epoch, bilevel };

inline const char* to_string(EngineKind e) {
  switch (e) {
    case EngineKind::bayes: return "bayes";
    case EngineKind::epoch: return "epoch";
    case EngineKind::bilevel: return "bilevel";
  }
  return "?";
}

/**
 * Closed-form minimizer over the simplex of
 *   <rho, c> + sum_t KL(rho, q_t) + inv_gamma * KL(rho, anchor),
 * i.e. rho ∝ [anchor^{inv_gamma} * prod_t q_t * exp(-c)]^{1/(n + inv_gamma)}.
 * Entries where the anchor or some q_t vanish get probability zero.
 */
inline std::vector<double> geometric_mixture(std::span<const double> anchor, double inv_gamma,
                                             const std::vector<std::vector<double>>& posteriors,
                                             std::span<const double> linear) {
  const std::size_t n = anchor.size();
  const double denom = static_cast<double>(posteriors.size()) + inv_gamma;
  if (!(denom > 0.0)) throw InvalidArgument("mixture needs a positive total weight");
  std::vector<double> logw(n);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double s = -linear[i];
    if (inv_gamma > 0.0) s = anchor[i] > 0.0 ? s + inv_gamma * std::log(anchor[i]) : ninf;
    for (const auto& q : posteriors) {
      if (!std::isfinite(s)) break;
      s = q[i] > 0.0 ? s + std::log(q[i]) : ninf;
    }
    logw[i] = std::isfinite(s) ? s / denom : ninf;
  }
  return softmax_logs(logw);
}

/// rho' = nu_phi(.|pi, o).
inline std::vector<double> bayes_update(const DecisionProblem& prob, std::span<const double> nu, int pi,
                                        int o) {
  return posterior_infoset(prob.env(), prob.partition(), nu, pi, o);
}

/// tau = round(T^{1/3}), bumped to the next even integer (at least 2).
inline int epoch_length(int T) {
  int tau = static_cast<int>(std::llround(std::cbrt(static_cast<double>(T))));
  if (tau % 2 != 0) ++tau;
  return std::max(tau, 2);
}

/**
 * Split-batch loss over one epoch:
 *   L(phi)_j = (tau/(B^2 H)) sum_h mean_{first half}(l_h,j) * mean_{second half}(l_h,j),
 *   L(phi) = sum_j L(phi)_j.
 */
inline std::vector<double> epoch_loss(const DecisionProblem& prob, const std::vector<Trajectory>& obs) {
  const int tau = static_cast<int>(obs.size());
  if (tau == 0 || tau % 2 != 0) throw OddEpoch("epoch length must be even and positive, got " + std::to_string(tau));
  const auto& spec = prob.spec();
  const int H = spec.H, half = tau / 2;
  const double scale = tau / (spec.B_av * spec.B_av * H);
  std::vector<double> out(prob.num_infosets(), 0.0);
  for (int phi = 0; phi < prob.num_infosets(); ++phi) {
    const Infoset& f = prob.partition().infoset(phi);
    const int N = f.num_components();
    std::vector<double> lo(N * H, 0.0), hi(N * H, 0.0);
    for (int t = 0; t < tau; ++t)
      for (int h = 0; h < H; ++h) {
        auto l = td_residual(prob.env(), f, obs[t], h);
        auto& dst = t < half ? lo : hi;
        for (int j = 0; j < N; ++j) dst[j * H + h] += l[j] / half;
      }
    double s = 0.0;
    for (int k = 0; k < N * H; ++k) s += lo[k] * hi[k];
    out[phi] = scale * s;
  }
  return out;
}

/**
 * Epoch engine: rho is updated once per epoch of tau rounds from the
 * split-batch loss and the per-round posteriors of the epoch-start nu.
 */
class EpochEngine {
 public:
  /// `tau` = 0 derives the epoch length from T; otherwise it must be even.
  /// `posterior_terms` = false drops the per-round KL(rho, q_t) terms from the update.
  EpochEngine(const DecisionProblem& prob, int T, double delta = 0.01, int tau = 0, bool posterior_terms = true)
      : prob_(prob), T_(T), delta_(delta), posterior_terms_(posterior_terms) {
    if (T < 1) throw InvalidArgument("T must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    if (tau < 0 || tau % 2 != 0) throw OddEpoch("epoch length must be a positive even integer, got " + std::to_string(tau));
    tau_ = tau > 0 ? tau : epoch_length(T);
    K_ = T / tau_;
    const int N = prob.spec().N, H = prob.spec().H;
    iota_ = std::log(12.0 * N * std::max(K_, 1) * H / delta);
    beta_ = 7.0 * tau_ * N * iota_;
    gamma_ = 1.0 / (2.0 * beta_);
    rho_.assign(prob.num_infosets(), 1.0 / prob.num_infosets());
  }

  int tau() const { return tau_; }
  int num_epochs() const { return K_; }
  int epochs_done() const { return k_; }
  double iota() const { return iota_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& rho() const { return rho_; }
  double max_loss_ratio() const { return max_loss_ratio_; }
  const std::vector<double>& last_loss() const { return last_loss_; }

  /// Records one round of the current epoch; returns true when rho changed.
  bool observe(std::span<const double> nu, int pi, int o) {
    if (k_ >= K_) return false;  // trailing short epoch: played, not used
    buffer_.push_back(prob_.env().observations(pi).at(o));
    posteriors_.push_back(posterior_infoset(prob_.env(), prob_.partition(), nu, pi, o));
    if (static_cast<int>(buffer_.size()) < tau_) return false;
    auto L = epoch_loss(prob_, buffer_);
    const double bound = static_cast<double>(tau_) * prob_.spec().N;
    std::vector<double> c(L.size());
    for (std::size_t i = 0; i < L.size(); ++i) {
      max_loss_ratio_ = std::max(max_loss_ratio_, std::abs(L[i]) / bound);
      c[i] = L[i] + (4.0 * gamma_ + 2.0 / beta_) * L[i] * L[i];
    }
    rho_ = geometric_mixture(rho_, 1.0 / gamma_, posterior_terms_ ? posteriors_ : decltype(posteriors_){}, c);
    last_loss_ = std::move(L);
    buffer_.clear();
    posteriors_.clear();
    ++k_;
    return true;
  }

 private:
  const DecisionProblem& prob_;
  int T_;
  double delta_;
  bool posterior_terms_ = true;
  int tau_ = 2, K_ = 0, k_ = 0;
  double iota_ = 0.0, beta_ = 0.0, gamma_ = 0.0;
  double max_loss_ratio_ = 0.0;
  std::vector<double> rho_;
  std::vector<double> last_loss_;
  std::vector<Trajectory> buffer_;
  std::vector<std::vector<double>> posteriors_;
};

/**
 * Bi-level engine: top-level rho from a centered squared-TD loss plus a
 * stability bonus, inner conditionals q(.|phi) by exponential weights.
 */
class BilevelEngine {
 public:
  explicit BilevelEngine(const DecisionProblem& prob) : prob_(prob) {
    const int n = prob.num_infosets();
    iota_ = 64.0 * std::log(static_cast<double>(n));
    gamma_ = n > 1 ? 1.0 / (4.0 * iota_) : std::numeric_limits<double>::infinity();
    rho_.assign(n, 1.0 / n);
    q_ = Eigen::MatrixXd::Constant(n, n, 1.0 / n);  // q_(phi', phi) = q(phi'|phi)
    cum_ = Eigen::MatrixXd::Zero(n, n);
    running_max_.assign(n, 0.0);
  }

  double iota() const { return iota_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& rho() const { return rho_; }
  /// q(phi'|phi) as column phi.
  const Eigen::MatrixXd& inner() const { return q_; }
  const std::vector<double>& running_max() const { return running_max_; }
  const std::vector<double>& last_bonus() const { return last_bonus_; }
  const std::vector<double>& last_loss() const { return last_loss_; }
  std::vector<double> alpha() const {
    std::vector<double> a(running_max_.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = 1.0 / (16.0 * running_max_[i]);
    return a;
  }
  /// Sum over rounds of <rho_t, b_t>.
  double bonus_mass() const { return bonus_mass_; }

  /// Delta_t(phi', phi) = (1/(B^2 H)) sum_h xi_h(phi', phi; o_h).
  Eigen::MatrixXd squared_losses(const Trajectory& t) const {
    const int n = prob_.num_infosets();
    const auto& spec = prob_.spec();
    Eigen::MatrixXd D(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double s = 0.0;
        for (int h = 0; h < spec.H; ++h)
          s += squared_td(prob_.env(), prob_.partition().infoset(a), prob_.partition().infoset(b), t, h);
        D(a, b) = s / (spec.B_sq * spec.B_sq * spec.H);
      }
    return D;
  }

  /// One round; always updates rho and q.
  void observe(std::span<const double> nu, int pi, int o) {
    const int n = prob_.num_infosets();
    auto post = posterior_infoset(prob_.env(), prob_.partition(), nu, pi, o);
    if (n == 1) return;
    Eigen::MatrixXd D = squared_losses(prob_.env().observations(pi).at(o));
    std::vector<double> L(n), b(n), c(n);
    for (int phi = 0; phi < n; ++phi) {
      L[phi] = D(phi, phi) - q_.col(phi).dot(D.col(phi));
      b[phi] = rho_[phi] > 0.0 ? iota_ * std::max(rho_[phi] - running_max_[phi], 0.0) / rho_[phi] : 0.0;
      c[phi] = L[phi] + 4.0 * gamma_ * L[phi] * L[phi] + b[phi];
      bonus_mass_ += rho_[phi] * b[phi];
    }
    auto next = geometric_mixture(rho_, 1.0 / gamma_, {post}, c);
    for (int phi = 0; phi < n; ++phi) {
      cum_.col(phi) += rho_[phi] * D.col(phi);
      running_max_[phi] = std::max(running_max_[phi], rho_[phi]);
      double alpha = 1.0 / (16.0 * running_max_[phi]);
      std::vector<double> logw(n);
      for (int a = 0; a < n; ++a) logw[a] = -alpha * cum_(a, phi);
      auto w = softmax_logs(logw);
      for (int a = 0; a < n; ++a) q_(a, phi) = w[a];
    }
    last_loss_ = std::move(L);
    last_bonus_ = std::move(b);
    rho_ = std::move(next);
  }

 private:
  const DecisionProblem& prob_;
  double iota_ = 0.0, gamma_ = 0.0;
  double bonus_mass_ = 0.0;
  std::vector<double> rho_;
  Eigen::MatrixXd q_, cum_;
  std::vector<double> running_max_;
  std::vector<double> last_bonus_, last_loss_;
};

/// Per-round Est contributions: log-likelihood-ratio part and divergence part.
struct EstTerms {
  double kl = 0.0;
  double div = 0.0;
};

/**
 * E_{pi~p} E_{o~M(.|pi)} log(nu(phi*|pi,o) / rho(phi*))  and
 * E_{pi~p} E_{phi~rho} Dbar^pi(phi||M), both exact.
 */
inline EstTerms est_round(const DecisionProblem& prob, std::span<const double> p,
                          std::span<const double> rho, std::span<const double> nu, int model,
                          int phi_star, DivergenceMode mode) {
  EstTerms e;
  const auto& dbar = prob.divergence(mode);
  const auto& part = prob.partition();
  const double log_rho = std::log(rho[phi_star]);
  auto [b, len] = prob.block(phi_star);
  for (int pi = 0; pi < prob.num_policies(); ++pi) {
    if (p[pi] <= 0.0) continue;
    const auto& L = prob.likelihood(pi);
    const auto& space = prob.env().observations(pi);
    double kl = 0.0;
    for (Eigen::Index o = 0; o < L.cols(); ++o) {
      double m = space.likelihood(model, static_cast<int>(o));
      if (m == 0.0) continue;
      double W = 0.0, w = 0.0;
      for (int k = 0; k < part.num_world_points(); ++k) W += nu[k] * L(k, o);
      for (int k = b; k < b + len; ++k) w += nu[k] * L(k, o);
      kl += m * (std::log(w / W) - log_rho);
    }
    double div = 0.0;
    for (int phi = 0; phi < prob.num_infosets(); ++phi) div += rho[phi] * dbar(pi, phi, model);
    e.kl += p[pi] * kl;
    e.div += p[pi] * div;
  }
  return e;
}

}  // namespace digdec
