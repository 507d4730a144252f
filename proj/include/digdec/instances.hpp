#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "digdec/environment.hpp"
#include "digdec/errors.hpp"
#include "digdec/mdp.hpp"
#include "digdec/partition.hpp"
#include "digdec/problem.hpp"

namespace digdec {

/// Three-arm, two-model separation instance.
struct ToyBandit {
  Environment env;
  InfosetPartition partition;
  double delta = 0.0;
  double p_plus = 0.0;
  double p_minus = 0.0;
  double epsilon = 0.0;
};

/**
 * Delta = 1/(16 sqrt T), p+- = 1/2 +- Delta, eps = epsilon_ratio * Delta.
 * M1 = (Ber(p-), Ber(p+), eps*Ber(1/2)), M2 = (Ber(p+), Ber(p-), eps/2).
 * Reward support: {0, 1, eps, eps/2}.
 */
inline ToyBandit make_toy_bandit(int T, double epsilon_ratio) {
  if (T < 1) throw InvalidArgument("T must be at least 1");
  if (!(epsilon_ratio > 0.0 && epsilon_ratio < 1.0))
    throw InvalidArgument("epsilon_ratio must lie in (0,1)");
  ToyBandit t{};
  t.delta = 1.0 / (16.0 * std::sqrt(static_cast<double>(T)));
  t.p_plus = 0.5 + t.delta;
  t.p_minus = 0.5 - t.delta;
  t.epsilon = epsilon_ratio * t.delta;
  std::vector<double> support{0.0, 1.0, t.epsilon, 0.5 * t.epsilon};
  auto ber = [](double p) { return std::vector<double>{1.0 - p, p, 0.0, 0.0}; };
  TabularMdp m1 = make_bandit_model(support, {ber(t.p_minus), ber(t.p_plus), {0.5, 0.0, 0.5, 0.0}});
  TabularMdp m2 = make_bandit_model(support, {ber(t.p_plus), ber(t.p_minus), {0.0, 0.0, 0.0, 1.0}});
  Layout L({1}, 3);
  std::vector<Policy> arms;
  for (int a = 0; a < 3; ++a) arms.push_back(Policy::deterministic(L, {a}));
  t.env = Environment::stochastic({m1, m2}, std::move(arms));
  t.partition = build_partition_stochastic(t.env);
  return t;
}

inline DecisionProblem toy_problem(int T, double epsilon_ratio) {
  auto t = make_toy_bandit(T, epsilon_ratio);
  return DecisionProblem(std::move(t.env), std::move(t.partition));
}

/// Bernoulli bandit with rewards on {0,1}; means[m][a].
inline Environment make_bernoulli_bandits(const std::vector<std::vector<double>>& means) {
  std::vector<TabularMdp> models;
  const int A = static_cast<int>(means.at(0).size());
  for (const auto& row : means) {
    if (static_cast<int>(row.size()) != A) throw InvalidArgument("ragged arm means");
    std::vector<std::vector<double>> laws;
    for (double p : row) laws.push_back({1.0 - p, p});
    models.push_back(make_bandit_model({0.0, 1.0}, laws));
  }
  Layout L({1}, A);
  std::vector<Policy> arms;
  for (int a = 0; a < A; ++a) arms.push_back(Policy::deterministic(L, {a}));
  return Environment::stochastic(std::move(models), std::move(arms));
}

/// Two arms, two worlds with swapped means 0.6 / 0.4.
inline DecisionProblem two_world_bandit() {
  auto env = make_bernoulli_bandits({{0.6, 0.4}, {0.4, 0.6}});
  auto part = build_partition_stochastic(env);
  return DecisionProblem(std::move(env), std::move(part));
}

/// Three arms, three worlds; arm 2 is informative but never optimal.
inline DecisionProblem three_world_bandit() {
  auto env = make_bernoulli_bandits({{0.7, 0.5, 0.3}, {0.5, 0.7, 0.5}, {0.5, 0.5, 0.6}});
  auto part = build_partition_stochastic(env);
  return DecisionProblem(std::move(env), std::move(part));
}

namespace detail {

/// Layer-1 dynamics variants of the two-layer chain (|S_2| = 3, |A| = 2).
inline std::vector<std::vector<double>> chain_layer1_next(int variant) {
  if (variant == 0) return {{0.6, 0.4, 0.0}, {0.0, 0.5, 0.5}};
  return {{0.0, 0.4, 0.6}, {0.5, 0.5, 0.0}};
}

/// Probability of reward 1/2 at layer 2, per (s2, a), for reward variant j.
inline std::vector<std::vector<double>> chain_layer2_reward(int variant) {
  if (variant == 0) return {{0.9, 0.1}, {0.5, 0.3}, {0.2, 0.6}};
  return {{0.2, 0.6}, {0.3, 0.5}, {0.9, 0.1}};
}

}  // namespace detail

/**
 * Two-layer tabular chain: S_1 = {s1}, |S_2| = 3, |A| = 2, rewards on {0, 1/2}.
 * Models are the product of two layer-1 dynamics and two layer-2 reward tables.
 */
inline Environment make_stochastic_chain() {
  Layout L({1, 3}, 2);
  const std::vector<double> support{0.0, 0.5};
  std::vector<TabularMdp> models;
  const std::vector<double> r1{0.5, 0.4};  // P(r = 1/2) at (s1, a)
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::vector<std::vector<double>> next(L.num_sa()), reward(L.num_sa());
      auto n1 = detail::chain_layer1_next(i);
      auto r2 = detail::chain_layer2_reward(j);
      for (int a = 0; a < 2; ++a) {
        next[L.sa_index(0, 0, a)] = n1[a];
        reward[L.sa_index(0, 0, a)] = {1.0 - r1[a], r1[a]};
      }
      for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) reward[L.sa_index(1, s, a)] = {1.0 - r2[s][a], r2[s][a]};
      models.emplace_back(L, support, std::move(next), std::move(reward));
    }
  return Environment::stochastic(std::move(models), all_deterministic_policies(L));
}

/// Chain with the plain Q* partition.
inline DecisionProblem stochastic_chain_problem() {
  auto env = make_stochastic_chain();
  auto part = build_partition_stochastic(env);
  return DecisionProblem(std::move(env), std::move(part));
}

/// Chain with the Bellman-complete closure of the Q* partition.
inline DecisionProblem stochastic_chain_complete_problem() {
  auto env = make_stochastic_chain();
  auto part = complete_partition(env, build_partition_stochastic(env));
  return DecisionProblem(std::move(env), std::move(part));
}

/**
 * Hybrid chain: the chain's two transition kernels, two linear rewards
 * R_A = feature 0, R_B = feature 1, features in [0, 1/2]^2.
 */
inline Environment make_hybrid_chain() {
  Layout L({1, 3}, 2);
  const std::vector<double> support{0.0, 0.5};
  std::vector<std::vector<double>> feats(L.num_sa());
  feats[L.sa_index(0, 0, 0)] = {0.25, 0.1};
  feats[L.sa_index(0, 0, 1)] = {0.1, 0.25};
  const double f2[3][2][2] = {{{0.5, 0.0}, {0.1, 0.3}}, {{0.3, 0.2}, {0.2, 0.35}}, {{0.0, 0.45}, {0.4, 0.1}}};
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) feats[L.sa_index(1, s, a)] = {f2[s][a][0], f2[s][a][1]};
  FeatureMap F(L, 2, feats);

  std::vector<std::vector<std::vector<double>>> transitions;
  for (int i = 0; i < 2; ++i) {
    std::vector<std::vector<double>> next(L.num_sa());
    auto n1 = detail::chain_layer1_next(i);
    for (int a = 0; a < 2; ++a) next[L.sa_index(0, 0, a)] = n1[a];
    transitions.push_back(std::move(next));
  }
  std::vector<std::vector<std::vector<double>>> rewards;
  for (int j = 0; j < 2; ++j) {
    std::vector<std::vector<double>> rows(L.num_sa());
    for (int sa = 0; sa < L.num_sa(); ++sa) {
      double mean = feats[sa][j];
      rows[sa] = {1.0 - 2.0 * mean, 2.0 * mean};
    }
    rewards.push_back(std::move(rows));
  }
  return Environment::hybrid(L, support, transitions, rewards, F, all_deterministic_policies(L));
}

inline DecisionProblem hybrid_chain_problem() {
  auto env = make_hybrid_chain();
  auto part = build_partition_hybrid(env);
  return DecisionProblem(std::move(env), std::move(part));
}

}  // namespace digdec
