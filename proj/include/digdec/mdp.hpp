#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "digdec/distribution.hpp"
#include "digdec/errors.hpp"

namespace digdec {

/// Layered state space S_1, ..., S_H (with |S_1| = 1) and a shared action set.
class Layout {
 public:
  Layout() = default;
  Layout(std::vector<int> layer_sizes, int num_actions)
      : layer_sizes_(std::move(layer_sizes)), num_actions_(num_actions) {
    if (layer_sizes_.empty()) throw InvalidArgument("horizon must be positive");
    if (layer_sizes_[0] != 1) throw InvalidArgument("the first layer must hold a single state");
    if (num_actions_ < 1) throw InvalidArgument("need at least one action");
    offsets_.push_back(0);
    for (int n : layer_sizes_) {
      if (n < 1) throw InvalidArgument("empty layer");
      offsets_.push_back(offsets_.back() + n);
    }
  }

  int horizon() const { return static_cast<int>(layer_sizes_.size()); }
  int layer_size(int h) const { return layer_sizes_.at(h); }
  int num_actions() const { return num_actions_; }
  int num_states() const { return offsets_.back(); }
  int num_sa() const { return num_states() * num_actions_; }
  int state_index(int h, int s) const { return offsets_[h] + s; }
  int sa_index(int h, int s, int a) const { return (offsets_[h] + s) * num_actions_ + a; }
  int layer_of_state(int global) const {
    int h = 0;
    while (offsets_[h + 1] <= global) ++h;
    return h;
  }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }

  bool operator==(const Layout& o) const {
    return layer_sizes_ == o.layer_sizes_ && num_actions_ == o.num_actions_;
  }

 private:
  std::vector<int> layer_sizes_;
  int num_actions_ = 0;
  std::vector<int> offsets_;
};

/// Markov policy: an action distribution per (global) state. Deterministic
/// policies put all mass on one action.
class Policy {
 public:
  Policy() = default;
  Policy(const Layout& layout, std::vector<std::vector<double>> action_probs)
      : probs_(std::move(action_probs)) {
    if (static_cast<int>(probs_.size()) != layout.num_states())
      throw InvalidArgument("policy must cover every state");
    for (const auto& row : probs_) {
      if (static_cast<int>(row.size()) != layout.num_actions())
        throw InvalidArgument("policy row has wrong action count");
      require_distribution(row, "policy row");
    }
  }

  static Policy deterministic(const Layout& layout, const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != layout.num_states())
      throw InvalidArgument("policy must cover every state");
    std::vector<std::vector<double>> rows(actions.size(),
                                          std::vector<double>(layout.num_actions(), 0.0));
    for (std::size_t s = 0; s < actions.size(); ++s) rows[s].at(actions[s]) = 1.0;
    return Policy(layout, std::move(rows));
  }

  static Policy uniform(const Layout& layout) {
    std::vector<std::vector<double>> rows(
        layout.num_states(),
        std::vector<double>(layout.num_actions(), 1.0 / layout.num_actions()));
    return Policy(layout, std::move(rows));
  }

  double prob(int state, int action) const { return probs_[state][action]; }
  const std::vector<double>& row(int state) const { return probs_[state]; }
  int num_states() const { return static_cast<int>(probs_.size()); }

  bool is_deterministic() const {
    for (const auto& r : probs_)
      if (std::count(r.begin(), r.end(), 1.0) != 1) return false;
    return true;
  }

  /// Action of a deterministic policy (the most likely one otherwise).
  int action(int state) const {
    const auto& r = probs_[state];
    return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }

  bool operator==(const Policy& o) const { return probs_ == o.probs_; }

 private:
  std::vector<std::vector<double>> probs_;
};

/// All |A|^{|S|} deterministic policies, enumerated in lexicographic order
/// of the action vector (state 0 most significant).
inline std::vector<Policy> all_deterministic_policies(const Layout& layout, std::size_t cap = 4096) {
  const int ns = layout.num_states();
  const int na = layout.num_actions();
  double count = std::pow(static_cast<double>(na), ns);
  if (count > static_cast<double>(cap))
    throw CapExceeded("deterministic policy class has " + std::to_string(count) + " members");
  std::vector<Policy> out;
  std::vector<int> acts(ns, 0);
  while (true) {
    out.push_back(Policy::deterministic(layout, acts));
    int i = ns - 1;
    while (i >= 0 && ++acts[i] == na) acts[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

/**
 * Finite-horizon layered MDP with finite reward supports.
 * Bandits are the special case of one layer holding one state.
 */
class TabularMdp {
 public:
  TabularMdp() = default;

  /// `next[sa]` is a distribution over layer h+1 (empty on the last layer);
  /// `reward[sa]` is a distribution over `reward_values`.
  TabularMdp(Layout layout, std::vector<double> reward_values,
             std::vector<std::vector<double>> next, std::vector<std::vector<double>> reward)
      : layout_(std::move(layout)),
        reward_values_(std::move(reward_values)),
        next_(std::move(next)),
        reward_(std::move(reward)) {
    validate();
    mean_reward_.resize(layout_.num_sa());
    for (int sa = 0; sa < layout_.num_sa(); ++sa) {
      double m = 0.0;
      for (std::size_t r = 0; r < reward_values_.size(); ++r) m += reward_values_[r] * reward_[sa][r];
      mean_reward_[sa] = m;
    }
  }

  const Layout& layout() const { return layout_; }
  const std::vector<double>& reward_values() const { return reward_values_; }
  std::span<const double> next(int sa) const { return next_[sa]; }
  std::span<const double> reward_probs(int sa) const { return reward_[sa]; }
  double mean_reward(int sa) const { return mean_reward_[sa]; }
  const std::vector<double>& mean_rewards() const { return mean_reward_; }
  const std::vector<std::vector<double>>& next_table() const { return next_; }
  const std::vector<std::vector<double>>& reward_table() const { return reward_; }

 private:
  void validate() const {
    const int H = layout_.horizon();
    if (reward_values_.empty()) throw InvalidArgument("empty reward support");
    for (double r : reward_values_)
      if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("reward support outside [0,1]");
    if (static_cast<int>(next_.size()) != layout_.num_sa() ||
        static_cast<int>(reward_.size()) != layout_.num_sa())
      throw InvalidArgument("transition/reward tables must cover every (h,s,a)");
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < layout_.layer_size(h); ++s)
        for (int a = 0; a < layout_.num_actions(); ++a) {
          int sa = layout_.sa_index(h, s, a);
          if (h + 1 < H) {
            if (static_cast<int>(next_[sa].size()) != layout_.layer_size(h + 1))
              throw InvalidArgument("transition row must cover the next layer");
            require_distribution(next_[sa], "transition row");
          } else if (!next_[sa].empty()) {
            throw InvalidArgument("last-layer transition rows must be empty");
          }
          if (reward_[sa].size() != reward_values_.size())
            throw InvalidArgument("reward row must cover the reward support");
          require_distribution(reward_[sa], "reward row");
        }
    // Largest realizable return must stay within [0,1].
    std::vector<double> best, upper;
    for (int h = H - 1; h >= 0; --h) {
      upper.assign(layout_.layer_size(h), 0.0);
      for (int s = 0; s < layout_.layer_size(h); ++s)
        for (int a = 0; a < layout_.num_actions(); ++a) {
          int sa = layout_.sa_index(h, s, a);
          double rmax = 0.0;
          for (std::size_t r = 0; r < reward_values_.size(); ++r)
            if (reward_[sa][r] > 0.0) rmax = std::max(rmax, reward_values_[r]);
          double cont = 0.0;
          if (h + 1 < H)
            for (std::size_t s2 = 0; s2 < next_[sa].size(); ++s2)
              if (next_[sa][s2] > 0.0) cont = std::max(cont, best[s2]);
          upper[s] = std::max(upper[s], rmax + cont);
        }
      best = upper;
    }
    if (best[0] > 1.0 + 1e-12) throw InvalidArgument("some realizable return exceeds 1");
  }

  Layout layout_;
  std::vector<double> reward_values_;
  std::vector<std::vector<double>> next_;
  std::vector<std::vector<double>> reward_;
  std::vector<double> mean_reward_;
};

/// One-state, one-layer MDP whose actions are the arms.
inline TabularMdp make_bandit_model(const std::vector<double>& reward_values,
                                    const std::vector<std::vector<double>>& arm_laws) {
  Layout layout({1}, static_cast<int>(arm_laws.size()));
  std::vector<std::vector<double>> next(arm_laws.size());
  return TabularMdp(layout, reward_values, std::move(next), arm_laws);
}

/// Max over actions of a per-(h,s,a) table, per global state.
inline std::vector<double> state_max(const Layout& layout, std::span<const double> q) {
  std::vector<double> v(layout.num_states());
  const int A = layout.num_actions();
  for (int s = 0; s < layout.num_states(); ++s)
    v[s] = *std::max_element(q.begin() + s * A, q.begin() + (s + 1) * A);
  return v;
}

/// Policy-weighted average of a per-(h,s,a) table, per global state.
inline std::vector<double> state_average(const Layout& layout, const Policy& pi,
                                         std::span<const double> q) {
  std::vector<double> v(layout.num_states(), 0.0);
  const int A = layout.num_actions();
  for (int s = 0; s < layout.num_states(); ++s)
    for (int a = 0; a < A; ++a) v[s] += pi.prob(s, a) * q[s * A + a];
  return v;
}

/// One Bellman backup: y(s,a) + E_{s'~P(.|s,a)} v(s') with v on global states.
inline std::vector<double> bellman_backup(const TabularMdp& m, std::span<const double> y,
                                          std::span<const double> v_next) {
  const Layout& L = m.layout();
  std::vector<double> q(L.num_sa());
  for (int h = 0; h < L.horizon(); ++h)
    for (int s = 0; s < L.layer_size(h); ++s)
      for (int a = 0; a < L.num_actions(); ++a) {
        int sa = L.sa_index(h, s, a);
        double c = y[sa];
        if (h + 1 < L.horizon()) {
          auto row = m.next(sa);
          for (std::size_t s2 = 0; s2 < row.size(); ++s2)
            c += row[s2] * v_next[L.state_index(h + 1, static_cast<int>(s2))];
        }
        q[sa] = c;
      }
  return q;
}

/// Optimal Q table by backward induction.
inline std::vector<double> q_star(const TabularMdp& m) {
  const Layout& L = m.layout();
  std::vector<double> q(L.num_sa(), 0.0), v(L.num_states(), 0.0);
  for (int h = L.horizon() - 1; h >= 0; --h)
    for (int s = 0; s < L.layer_size(h); ++s) {
      double best = -1e300;
      for (int a = 0; a < L.num_actions(); ++a) {
        int sa = L.sa_index(h, s, a);
        double c = m.mean_reward(sa);
        if (h + 1 < L.horizon()) {
          auto row = m.next(sa);
          for (std::size_t s2 = 0; s2 < row.size(); ++s2)
            c += row[s2] * v[L.state_index(h + 1, static_cast<int>(s2))];
        }
        q[sa] = c;
        best = std::max(best, c);
      }
      v[L.state_index(h, s)] = best;
    }
  return q;
}

/// Q^pi for an arbitrary per-(h,s,a) step reward.
inline std::vector<double> q_policy(const TabularMdp& m, const Policy& pi,
                                    std::span<const double> step_reward) {
  const Layout& L = m.layout();
  std::vector<double> q(L.num_sa(), 0.0), v(L.num_states(), 0.0);
  for (int h = L.horizon() - 1; h >= 0; --h)
    for (int s = 0; s < L.layer_size(h); ++s) {
      int gs = L.state_index(h, s);
      double vs = 0.0;
      for (int a = 0; a < L.num_actions(); ++a) {
        int sa = L.sa_index(h, s, a);
        double c = step_reward[sa];
        if (h + 1 < L.horizon()) {
          auto row = m.next(sa);
          for (std::size_t s2 = 0; s2 < row.size(); ++s2)
            c += row[s2] * v[L.state_index(h + 1, static_cast<int>(s2))];
        }
        q[sa] = c;
        vs += pi.prob(gs, a) * c;
      }
      v[gs] = vs;
    }
  return q;
}

inline std::vector<double> q_policy(const TabularMdp& m, const Policy& pi) {
  return q_policy(m, pi, m.mean_rewards());
}

/// V_M(pi) = expected total reward from s_1.
inline double policy_value(const TabularMdp& m, const Policy& pi) {
  auto q = q_policy(m, pi);
  double v = 0.0;
  for (int a = 0; a < m.layout().num_actions(); ++a) v += pi.prob(0, a) * q[a];
  return v;
}

/// Greedy deterministic policy of a Q table; ties go to the lowest action.
inline Policy greedy_policy(const Layout& L, std::span<const double> q, double tie_tol = 1e-12) {
  std::vector<int> acts(L.num_states());
  const int A = L.num_actions();
  for (int s = 0; s < L.num_states(); ++s) {
    double mx = *std::max_element(q.begin() + s * A, q.begin() + (s + 1) * A);
    int a = 0;
    while (q[s * A + a] < mx - tie_tol) ++a;
    acts[s] = a;
  }
  return Policy::deterministic(L, acts);
}

/// Known d-dimensional features per (h,s,a) for linear rewards.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(const Layout& layout, int dim, std::vector<std::vector<double>> values)
      : dim_(dim), values_(std::move(values)) {
    if (dim_ < 1) throw InvalidArgument("feature dimension must be positive");
    if (static_cast<int>(values_.size()) != layout.num_sa())
      throw InvalidArgument("feature map must cover every (h,s,a)");
    for (const auto& v : values_)
      if (static_cast<int>(v.size()) != dim_) throw InvalidArgument("feature vector has wrong length");
  }

  int dim() const { return dim_; }
  const std::vector<double>& at(int sa) const { return values_[sa]; }

  /// Table of the j-th coordinate, optionally restricted to layer `only_layer`.
  std::vector<double> component(const Layout& L, int j, int only_layer = -1) const {
    std::vector<double> out(L.num_sa(), 0.0);
    for (int h = 0; h < L.horizon(); ++h) {
      if (only_layer >= 0 && h != only_layer) continue;
      for (int s = 0; s < L.layer_size(h); ++s)
        for (int a = 0; a < L.num_actions(); ++a) {
          int sa = L.sa_index(h, s, a);
          out[sa] = values_[sa][j];
        }
    }
    return out;
  }

  /// Least-squares theta_h per layer for a mean-reward table; throws when the
  /// residual exceeds `tol` (reward not linear in the features).
  std::vector<std::vector<double>> fit(const Layout& L, std::span<const double> mean_reward,
                                       double tol = 1e-9) const {
    std::vector<std::vector<double>> theta;
    for (int h = 0; h < L.horizon(); ++h) {
      const int rows = L.layer_size(h) * L.num_actions();
      Eigen::MatrixXd X(rows, dim_);
      Eigen::VectorXd y(rows);
      int r = 0;
      for (int s = 0; s < L.layer_size(h); ++s)
        for (int a = 0; a < L.num_actions(); ++a, ++r) {
          int sa = L.sa_index(h, s, a);
          for (int j = 0; j < dim_; ++j) X(r, j) = values_[sa][j];
          y(r) = mean_reward[sa];
        }
      Eigen::VectorXd th = X.completeOrthogonalDecomposition().solve(y);
      double resid = (X * th - y).cwiseAbs().maxCoeff();
      if (resid > tol)
        throw InvalidArgument("reward is not linear in the features at layer " + std::to_string(h));
      theta.emplace_back(th.data(), th.data() + th.size());
    }
    return theta;
  }

 private:
  int dim_ = 0;
  std::vector<std::vector<double>> values_;
};

}  // namespace digdec
