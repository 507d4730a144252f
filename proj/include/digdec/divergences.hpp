#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "digdec/distribution.hpp"
#include "digdec/environment.hpp"
#include "digdec/errors.hpp"
#include "digdec/partition.hpp"

namespace digdec {

enum class DivergenceMode { av, sq, none };

inline const char* to_string(DivergenceMode m) {
  switch (m) {
    case DivergenceMode::av: return "av";
    case DivergenceMode::sq: return "sq";
    case DivergenceMode::none: return "none";
  }
  return "?";
}

inline DivergenceMode parse_mode(const std::string& s) {
  if (s == "av") return DivergenceMode::av;
  if (s == "sq") return DivergenceMode::sq;
  if (s == "none") return DivergenceMode::none;
  throw InvalidArgument("unknown divergence mode '" + s + "'");
}

/// KL divergence that may be +infinity. The infinite case is a flag, not a number.
class KlValue {
 public:
  static KlValue finite(double v) { return KlValue(v, false); }
  static KlValue infinite() { return KlValue(0.0, true); }

  bool is_infinite() const { return infinite_; }
  double value() const {
    if (infinite_) throw InfiniteKL("KL divergence is infinite");
    return value_;
  }
  KlValue operator+(const KlValue& o) const {
    if (infinite_ || o.infinite_) return infinite();
    return finite(value_ + o.value_);
  }

 private:
  KlValue(double v, bool inf) : value_(v), infinite_(inf) {}
  double value_;
  bool infinite_;
};

/// KL(p, q) = sum p log(p/q) with 0 log 0 = 0.
inline KlValue kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("kl: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return KlValue::infinite();
    s += p[i] * std::log(p[i] / q[i]);
  }
  return KlValue::finite(std::max(s, 0.0));
}

inline KlValue kl(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  return kl(p.probs(), q.probs());
}

enum class EstimationKind { stochastic_td, hybrid_basis_td };

/// Estimation-function family: component count N and range bounds.
struct EstimationSpec {
  EstimationKind kind = EstimationKind::stochastic_td;
  int N = 1;
  double B_av = 1.0;  ///< bound on |l_h|
  double B_sq = 1.0;  ///< sqrt of the bound on xi_h
  int H = 1;
};

inline EstimationSpec make_estimation_spec(const Environment& env) {
  EstimationSpec s;
  s.H = env.layout().horizon();
  if (env.setting() == Setting::hybrid) {
    s.kind = EstimationKind::hybrid_basis_td;
    s.N = env.features().dim();
    s.B_av = 1.0;
    s.B_sq = std::sqrt(static_cast<double>(s.N));
  }
  return s;
}

namespace detail {

/// Target y_h: realized reward (stochastic) or feature coordinate (hybrid).
inline double td_target(const Environment& env, const Trajectory& o, int h, int j) {
  const Layout& L = env.layout();
  if (env.setting() == Setting::stochastic) return env.reward_values()[o.rewards[h]];
  return env.features().at(L.sa_index(h, o.states[h], o.actions[h]))[j];
}

inline double next_value(const Environment& env, const Infoset& phi, const Trajectory& o, int h,
                         int j) {
  const Layout& L = env.layout();
  if (h + 1 >= L.horizon()) return 0.0;
  return phi.state_values[j][L.state_index(h + 1, o.states[h + 1])];
}

}  // namespace detail

/// l_h(phi; o_h)_j = f_phi(s_h,a_h)_j - y_h,j - f_phi(s_{h+1})_j.
inline std::vector<double> td_residual(const Environment& env, const Infoset& phi,
                                       const Trajectory& o, int h) {
  const Layout& L = env.layout();
  int sa = L.sa_index(h, o.states[h], o.actions[h]);
  std::vector<double> out(phi.num_components());
  for (int j = 0; j < phi.num_components(); ++j)
    out[j] = phi.tables[j][sa] - detail::td_target(env, o, h, j) - detail::next_value(env, phi, o, h, j);
  return out;
}

/// xi_h(phi', phi; o_h) = || f_phi'(s_h,a_h) - y_h - f_phi(s_{h+1}) ||^2.
inline double squared_td(const Environment& env, const Infoset& phi_prime, const Infoset& phi,
                         const Trajectory& o, int h) {
  const Layout& L = env.layout();
  int sa = L.sa_index(h, o.states[h], o.actions[h]);
  double s = 0.0;
  for (int j = 0; j < phi.num_components(); ++j) {
    double r = phi_prime.tables[j][sa] - detail::td_target(env, o, h, j) -
               detail::next_value(env, phi, o, h, j);
    s += r * r;
  }
  return s;
}

/// Posterior over infosets after (pi, o): nu(phi|pi,o) ∝ sum_{psi in phi} nu(psi) M_psi(o|pi).
inline std::vector<double> posterior_infoset(const Environment& env, const InfosetPartition& part,
                                             std::span<const double> nu, int pi, int o) {
  const auto& lik = env.observations(pi).likelihood();
  std::vector<double> w(part.size(), 0.0);
  double total = 0.0;
  for (int k = 0; k < part.num_world_points(); ++k) {
    const auto& wp = part.world_point(k);
    double c = nu[k] * lik(wp.model, o);
    w[wp.infoset] += c;
    total += c;
  }
  if (!(total > 0.0)) throw ZeroEvidence("observation has zero likelihood under every supported model");
  for (double& x : w) x /= total;
  return w;
}

/// Index of T_M phi: the infoset whose tables (and policy, hybrid) match the backup.
inline int bellman_image(const Environment& env, const InfosetPartition& part, int model, int phi,
                         double tol = kGroupingTolerance) {
  const Infoset& src = part.infoset(phi);
  auto img = bellman_backup_tables(env, model, src);
  for (const auto& cand : part.infosets()) {
    if (env.setting() == Setting::hybrid && cand.policy != src.policy) continue;
    bool ok = true;
    for (std::size_t j = 0; j < img.size() && ok; ++j) ok = tables_match(cand.tables[j], img[j], tol);
    if (ok) return cand.id;
  }
  throw NotComplete("no infoset matches T_M phi for model " + std::to_string(model) + ", infoset " +
                    std::to_string(phi));
}

/// D_av^pi(phi||M) = max_j (1/(B^2 H)) sum_h (E^{pi,M}[l_h(phi)_j])^2, exact.
inline double d_av(const Environment& env, const InfosetPartition& part, int phi, int model, int pi,
                   const EstimationSpec& spec) {
  const Infoset& f = part.infoset(phi);
  const auto& space = env.observations(pi);
  const int H = env.layout().horizon();
  const int N = f.num_components();
  std::vector<double> mean(static_cast<std::size_t>(N * H), 0.0);
  for (std::size_t o = 0; o < space.size(); ++o) {
    double p = space.likelihood(model, static_cast<int>(o));
    if (p == 0.0) continue;
    for (int h = 0; h < H; ++h) {
      auto l = td_residual(env, f, space.at(o), h);
      for (int j = 0; j < N; ++j) mean[j * H + h] += p * l[j];
    }
  }
  double best = 0.0;
  for (int j = 0; j < N; ++j) {
    double s = 0.0;
    for (int h = 0; h < H; ++h) s += mean[j * H + h] * mean[j * H + h];
    best = std::max(best, s / (spec.B_av * spec.B_av * H));
  }
  return best;
}

/// D_sq via the xi-difference expectation.
inline double d_sq(const Environment& env, const InfosetPartition& part, int phi, int model, int pi,
                   const EstimationSpec& spec) {
  const Infoset& f = part.infoset(phi);
  const Infoset& g = part.infoset(bellman_image(env, part, model, phi));
  const auto& space = env.observations(pi);
  const int H = env.layout().horizon();
  double s = 0.0;
  for (std::size_t o = 0; o < space.size(); ++o) {
    double p = space.likelihood(model, static_cast<int>(o));
    if (p == 0.0) continue;
    for (int h = 0; h < H; ++h)
      s += p * (squared_td(env, f, f, space.at(o), h) - squared_td(env, g, f, space.at(o), h));
  }
  return s / (spec.B_sq * spec.B_sq * H);
}

/// D_sq via the squared table gap || f_phi - f_{T_M phi} ||^2 along visited pairs.
inline double d_sq_gap_form(const Environment& env, const InfosetPartition& part, int phi, int model,
                            int pi, const EstimationSpec& spec) {
  const Infoset& f = part.infoset(phi);
  const Infoset& g = part.infoset(bellman_image(env, part, model, phi));
  const auto& space = env.observations(pi);
  const Layout& L = env.layout();
  const int H = L.horizon();
  double s = 0.0;
  for (std::size_t o = 0; o < space.size(); ++o) {
    double p = space.likelihood(model, static_cast<int>(o));
    if (p == 0.0) continue;
    const auto& t = space.at(o);
    for (int h = 0; h < H; ++h) {
      int sa = L.sa_index(h, t.states[h], t.actions[h]);
      for (int j = 0; j < f.num_components(); ++j) {
        double d = f.tables[j][sa] - g.tables[j][sa];
        s += p * d * d;
      }
    }
  }
  return s / (spec.B_sq * spec.B_sq * H);
}

/**
 * Precomputed D^pi(phi||M) for one mode: table(pi)(phi, model).
 * Mode none yields all zeros.
 */
class DivergenceTable {
 public:
  DivergenceTable() = default;
  DivergenceTable(const Environment& env, const InfosetPartition& part, DivergenceMode mode)
      : mode_(mode) {
    auto spec = make_estimation_spec(env);
    for (int pi = 0; pi < env.num_policies(); ++pi) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(part.size(), env.num_models());
      if (mode != DivergenceMode::none)
        for (int phi = 0; phi < part.size(); ++phi)
          for (int m = 0; m < env.num_models(); ++m)
            t(phi, m) = mode == DivergenceMode::av ? d_av(env, part, phi, m, pi, spec)
                                                   : d_sq(env, part, phi, m, pi, spec);
      tables_.push_back(std::move(t));
    }
  }

  DivergenceMode mode() const { return mode_; }
  double operator()(int pi, int phi, int model) const { return tables_[pi](phi, model); }
  const Eigen::MatrixXd& policy_table(int pi) const { return tables_.at(pi); }

 private:
  DivergenceMode mode_ = DivergenceMode::none;
  std::vector<Eigen::MatrixXd> tables_;
};

/**
 * D^pi(nu||rho) = E_{psi~nu} E_{o~M_psi(.|pi)} [ KL(nu_phi(.|pi,o), rho) + E_{phi~rho} Dbar^pi(phi||M_psi) ].
 */
inline KlValue combined_divergence(const Environment& env, const InfosetPartition& part,
                                   const DivergenceTable& dbar, std::span<const double> nu,
                                   std::span<const double> rho, int pi) {
  const auto& space = env.observations(pi);
  const auto& lik = space.likelihood();
  KlValue total = KlValue::finite(0.0);
  for (std::size_t o = 0; o < space.size(); ++o) {
    double W = 0.0;
    for (int k = 0; k < part.num_world_points(); ++k)
      W += nu[k] * lik(part.world_point(k).model, static_cast<int>(o));
    if (W <= 0.0) continue;
    auto post = posterior_infoset(env, part, nu, pi, static_cast<int>(o));
    KlValue term = kl(post, rho);
    if (term.is_infinite()) return term;
    total = total + KlValue::finite(W * term.value());
  }
  double div = 0.0;
  for (int k = 0; k < part.num_world_points(); ++k) {
    if (nu[k] == 0.0) continue;
    int m = part.world_point(k).model;
    for (int phi = 0; phi < part.size(); ++phi) div += nu[k] * rho[phi] * dbar(pi, phi, m);
  }
  return total + KlValue::finite(div);
}

/// Breg_{D^pi(.||rho)}(nu, nu') = E_{psi~nu} E_o KL(nu_phi(.|pi,o), nu'_phi(.|pi,o)).
inline KlValue bregman_of_D(const Environment& env, const InfosetPartition& part,
                            std::span<const double> nu, std::span<const double> nu_prime, int pi) {
  const auto& space = env.observations(pi);
  const auto& lik = space.likelihood();
  KlValue total = KlValue::finite(0.0);
  for (std::size_t o = 0; o < space.size(); ++o) {
    double W = 0.0;
    for (int k = 0; k < part.num_world_points(); ++k)
      W += nu[k] * lik(part.world_point(k).model, static_cast<int>(o));
    if (W <= 0.0) continue;
    auto a = posterior_infoset(env, part, nu, pi, static_cast<int>(o));
    std::vector<double> b;
    try {
      b = posterior_infoset(env, part, nu_prime, pi, static_cast<int>(o));
    } catch (const ZeroEvidence&) {
      return KlValue::infinite();
    }
    KlValue term = kl(a, b);
    if (term.is_infinite()) return term;
    total = total + KlValue::finite(W * term.value());
  }
  return total;
}

}  // namespace digdec
