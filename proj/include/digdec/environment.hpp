#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "digdec/distribution.hpp"
#include "digdec/errors.hpp"
#include "digdec/mdp.hpp"
#include "digdec/random.hpp"

namespace digdec {

enum class Setting { stochastic, hybrid };

inline constexpr std::size_t kDefaultObservationCap = 50000;

/// One episode: s_h, a_h and the reward index r_h for every layer h.
struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<int> rewards;

  std::vector<int> key() const {
    std::vector<int> k;
    k.reserve(3 * states.size());
    for (std::size_t h = 0; h < states.size(); ++h) {
      k.push_back(states[h]);
      k.push_back(actions[h]);
      k.push_back(rewards[h]);
    }
    return k;
  }
  bool operator==(const Trajectory& o) const {
    return states == o.states && actions == o.actions && rewards == o.rewards;
  }
};

/**
 * All trajectories a policy can produce under any model of the class, with
 * their likelihood under every model (rows = models, columns = observations).
 */
class ObservationSpace {
 public:
  ObservationSpace() = default;
  ObservationSpace(std::vector<Trajectory> items, Eigen::MatrixXd likelihood)
      : items_(std::move(items)), likelihood_(std::move(likelihood)) {
    for (std::size_t i = 0; i < items_.size(); ++i) index_[items_[i].key()] = static_cast<int>(i);
  }

  std::size_t size() const { return items_.size(); }
  const Trajectory& at(std::size_t o) const { return items_.at(o); }
  const std::vector<Trajectory>& items() const { return items_; }
  const Eigen::MatrixXd& likelihood() const { return likelihood_; }
  double likelihood(int model, int o) const { return likelihood_(model, o); }

  int find(const Trajectory& t) const {
    auto it = index_.find(t.key());
    if (it == index_.end()) throw UnknownObservation("trajectory is outside the enumerated space");
    return it->second;
  }

 private:
  std::vector<Trajectory> items_;
  Eigen::MatrixXd likelihood_;
  std::map<std::vector<int>, int> index_;
};

/// M(o|pi) by multiplying policy, reward and transition factors along o.
inline double trajectory_likelihood(const TabularMdp& m, const Policy& pi, const Trajectory& o) {
  const Layout& L = m.layout();
  double p = 1.0;
  for (int h = 0; h < L.horizon(); ++h) {
    int s = o.states[h], a = o.actions[h];
    int sa = L.sa_index(h, s, a);
    p *= pi.prob(L.state_index(h, s), a);
    p *= m.reward_probs(sa)[o.rewards[h]];
    if (h + 1 < L.horizon()) p *= m.next(sa)[o.states[h + 1]];
    if (p == 0.0) return 0.0;
  }
  return p;
}

/// Union-of-supports trajectory enumeration for one policy.
inline std::vector<Trajectory> enumerate_trajectories(const std::vector<TabularMdp>& models,
                                                      const Policy& pi,
                                                      std::size_t cap = kDefaultObservationCap) {
  const Layout& L = models.at(0).layout();
  const int H = L.horizon();
  const std::size_t R = models[0].reward_values().size();
  std::vector<Trajectory> out;
  Trajectory cur;
  cur.states.assign(H, 0);
  cur.actions.assign(H, 0);
  cur.rewards.assign(H, 0);

  auto any_positive = [&](auto getter) {
    for (const auto& m : models)
      if (getter(m) > 0.0) return true;
    return false;
  };

  std::function<void(int, int)> rec = [&](int h, int s) {
    for (int a = 0; a < L.num_actions(); ++a) {
      if (pi.prob(L.state_index(h, s), a) <= 0.0) continue;
      int sa = L.sa_index(h, s, a);
      for (std::size_t r = 0; r < R; ++r) {
        if (!any_positive([&](const TabularMdp& m) { return m.reward_probs(sa)[r]; })) continue;
        cur.states[h] = s;
        cur.actions[h] = a;
        cur.rewards[h] = static_cast<int>(r);
        if (h + 1 == H) {
          out.push_back(cur);
          if (out.size() > cap)
            throw CapExceeded("observation space exceeds " + std::to_string(cap) + " outcomes");
          continue;
        }
        for (int s2 = 0; s2 < L.layer_size(h + 1); ++s2)
          if (any_positive([&](const TabularMdp& m) { return m.next(sa)[s2]; })) rec(h + 1, s2);
      }
    }
  };
  rec(0, 0);
  return out;
}

/// Draw one episode of `pi` in `m`.
inline Trajectory sample_trajectory(const TabularMdp& m, const Policy& pi, Rng& rng) {
  const Layout& L = m.layout();
  Trajectory t;
  int s = 0;
  for (int h = 0; h < L.horizon(); ++h) {
    int a = static_cast<int>(rng.categorical(pi.row(L.state_index(h, s))));
    int sa = L.sa_index(h, s, a);
    int r = static_cast<int>(rng.categorical(m.reward_probs(sa)));
    t.states.push_back(s);
    t.actions.push_back(a);
    t.rewards.push_back(r);
    if (h + 1 < L.horizon()) s = static_cast<int>(rng.categorical(m.next(sa)));
  }
  return t;
}

inline double total_reward(const TabularMdp& m, const Trajectory& t) {
  double r = 0.0;
  for (int idx : t.rewards) r += m.reward_values()[idx];
  return r;
}

/**
 * Finite DMSO instance: model class, policy class, per-policy observation
 * spaces and the value table V_M(pi).
 *
 * Hybrid instances store every (transition, reward) pair as a model with
 * index p * num_rewards + r.
 */
class Environment {
 public:
  static Environment stochastic(std::vector<TabularMdp> models, std::vector<Policy> policies,
                                std::size_t cap = kDefaultObservationCap) {
    Environment e;
    e.setting_ = Setting::stochastic;
    e.models_ = std::move(models);
    e.policies_ = std::move(policies);
    e.finish(cap);
    return e;
  }

  /// `transitions[p]` holds next-state rows per (h,s,a); `rewards[r]` holds
  /// reward-probability rows per (h,s,a) over `reward_values`.
  static Environment hybrid(const Layout& layout, std::vector<double> reward_values,
                            const std::vector<std::vector<std::vector<double>>>& transitions,
                            const std::vector<std::vector<std::vector<double>>>& rewards,
                            FeatureMap features, std::vector<Policy> policies,
                            std::size_t cap = kDefaultObservationCap) {
    Environment e;
    e.setting_ = Setting::hybrid;
    e.num_transitions_ = static_cast<int>(transitions.size());
    e.num_rewards_ = static_cast<int>(rewards.size());
    if (e.num_transitions_ < 1 || e.num_rewards_ < 1)
      throw InvalidArgument("hybrid classes must be nonempty");
    for (const auto& P : transitions)
      for (const auto& R : rewards) e.models_.emplace_back(layout, reward_values, P, R);
    e.features_ = std::move(features);
    for (int r = 0; r < e.num_rewards_; ++r)
      e.theta_.push_back(e.features_->fit(layout, e.models_[r].mean_rewards()));
    e.policies_ = std::move(policies);
    e.finish(cap);
    return e;
  }

  Setting setting() const { return setting_; }
  const Layout& layout() const { return models_.front().layout(); }
  const std::vector<double>& reward_values() const { return models_.front().reward_values(); }
  int num_models() const { return static_cast<int>(models_.size()); }
  int num_policies() const { return static_cast<int>(policies_.size()); }
  const TabularMdp& model(int m) const { return models_.at(m); }
  const std::vector<TabularMdp>& models() const { return models_; }
  const Policy& policy(int i) const { return policies_.at(i); }
  const std::vector<Policy>& policies() const { return policies_; }
  const ObservationSpace& observations(int pi) const { return spaces_.at(pi); }

  /// V_M(pi), exact.
  double value(int m, int pi) const { return values_(m, pi); }
  const Eigen::MatrixXd& value_table() const { return values_; }

  int num_transitions() const { return setting_ == Setting::hybrid ? num_transitions_ : 0; }
  int num_rewards() const { return setting_ == Setting::hybrid ? num_rewards_ : 0; }
  int model_index(int p, int r) const { return p * num_rewards_ + r; }
  int transition_of(int m) const { return m / num_rewards_; }
  int reward_of(int m) const { return m % num_rewards_; }
  const FeatureMap& features() const {
    if (!features_) throw InvalidArgument("instance has no feature map");
    return *features_;
  }
  /// theta_h(R) per layer for reward r.
  const std::vector<std::vector<double>>& theta(int r) const { return theta_.at(r); }

  /// Index of a policy equal to `pi`, or throws PolicyNotInClass.
  int find_policy(const Policy& pi) const {
    for (int i = 0; i < num_policies(); ++i)
      if (policies_[i] == pi) return i;
    throw PolicyNotInClass("policy is not a member of the policy class");
  }

  /// Sample o ~ M(.|pi) and return its index in the policy's space.
  int sample_observation(int m, int pi, Rng& rng) const {
    return spaces_[pi].find(sample_trajectory(models_[m], policies_[pi], rng));
  }

 private:
  void finish(std::size_t cap) {
    if (models_.empty()) throw InvalidArgument("empty model class");
    if (policies_.empty()) throw InvalidArgument("empty policy class");
    for (const auto& m : models_) {
      if (!(m.layout() == models_[0].layout())) throw InvalidArgument("models disagree on layout");
      if (m.reward_values() != models_[0].reward_values())
        throw InvalidArgument("models must share one global reward support");
    }
    values_.resize(num_models(), num_policies());
    for (int i = 0; i < num_policies(); ++i) {
      auto items = enumerate_trajectories(models_, policies_[i], cap);
      Eigen::MatrixXd lik(num_models(), static_cast<Eigen::Index>(items.size()));
      for (int m = 0; m < num_models(); ++m)
        for (std::size_t o = 0; o < items.size(); ++o)
          lik(m, static_cast<Eigen::Index>(o)) = trajectory_likelihood(models_[m], policies_[i], items[o]);
      spaces_.emplace_back(std::move(items), std::move(lik));
      for (int m = 0; m < num_models(); ++m) values_(m, i) = policy_value(models_[m], policies_[i]);
    }
  }

  Setting setting_ = Setting::stochastic;
  std::vector<TabularMdp> models_;
  std::vector<Policy> policies_;
  std::vector<ObservationSpace> spaces_;
  Eigen::MatrixXd values_;
  int num_transitions_ = 0;
  int num_rewards_ = 1;
  std::optional<FeatureMap> features_;
  std::vector<std::vector<std::vector<double>>> theta_;
};

}  // namespace digdec
