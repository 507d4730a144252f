#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "digdec/divergences.hpp"
#include "digdec/environment.hpp"
#include "digdec/instances.hpp"
#include "digdec/partition.hpp"
#include "digdec/problem.hpp"

namespace fixtures {

using digdec::DecisionProblem;
using digdec::Environment;
using digdec::Layout;
using digdec::Policy;
using digdec::TabularMdp;

/// Bandit class: laws[m][a] is a distribution over `support`.
inline Environment bandit_env(const std::vector<double>& support,
                              const std::vector<std::vector<std::vector<double>>>& laws) {
  std::vector<TabularMdp> models;
  for (const auto& m : laws) models.push_back(digdec::make_bandit_model(support, m));
  Layout L({1}, static_cast<int>(laws.at(0).size()));
  return Environment::stochastic(std::move(models), digdec::all_deterministic_policies(L));
}

inline DecisionProblem bandit_problem(const std::vector<double>& support,
                                      const std::vector<std::vector<std::vector<double>>>& laws) {
  auto env = bandit_env(support, laws);
  auto part = digdec::build_partition_stochastic(env);
  return DecisionProblem(std::move(env), std::move(part));
}

/// Two-layer hybrid instance, |S_2| = 2, |A| = 2, d = 2. Feature 0 is 0.2 on
/// both layer-2 states, feature 1 is 0 on state 0 and 0.4 on state 1. Kernel
/// P0 sends every action to state 0, kernel P1 to state 1. Reward tables R_j
/// have mean feature j, on support {0, 1/2}.
inline Environment hybrid_two_layer() {
  Layout L({1, 2}, 2);
  std::vector<std::vector<double>> feats(L.num_sa());
  for (int a = 0; a < 2; ++a) feats[L.sa_index(0, 0, a)] = {0.1, 0.1};
  for (int a = 0; a < 2; ++a) {
    feats[L.sa_index(1, 0, a)] = {0.2, 0.0};
    feats[L.sa_index(1, 1, a)] = {0.2, 0.4};
  }
  std::vector<std::vector<std::vector<double>>> transitions(2, std::vector<std::vector<double>>(L.num_sa()));
  for (int a = 0; a < 2; ++a) {
    transitions[0][L.sa_index(0, 0, a)] = {1.0, 0.0};
    transitions[1][L.sa_index(0, 0, a)] = {0.0, 1.0};
  }
  std::vector<std::vector<std::vector<double>>> rewards;
  for (int j = 0; j < 2; ++j) {
    std::vector<std::vector<double>> rows(L.num_sa());
    for (int sa = 0; sa < L.num_sa(); ++sa) rows[sa] = {1.0 - 2.0 * feats[sa][j], 2.0 * feats[sa][j]};
    rewards.push_back(std::move(rows));
  }
  return Environment::hybrid(L, {0.0, 0.5}, transitions, rewards, digdec::FeatureMap(L, 2, feats),
                             digdec::all_deterministic_policies(L));
}

inline std::vector<double> uniform(int n) { return std::vector<double>(n, 1.0 / n); }

}  // namespace fixtures

namespace fixtures {

/// Straight-line AIR: sum_pi p(pi) [ E_nu(V(pi*) - V(pi)) - D^pi(nu||rho)/eta ] with
/// D rebuilt from posteriors and d_av / d_sq on the spot. nullopt for an infinite D.
inline std::optional<double> brute_air(const DecisionProblem& prob, const std::vector<double>& p,
                                       const std::vector<double>& nu, const std::vector<double>& rho, double eta,
                                       digdec::DivergenceMode mode) {
  const auto& env = prob.env();
  const auto& part = prob.partition();
  double total = 0.0;
  for (int pi = 0; pi < prob.num_policies(); ++pi) {
    if (p[pi] == 0.0) continue;
    const auto& space = env.observations(pi);
    double gain = 0.0, D = 0.0;
    for (int k = 0; k < part.num_world_points(); ++k) {
      const auto& wp = part.world_point(k);
      gain += nu[k] * (env.value(wp.model, wp.policy) - env.value(wp.model, pi));
      for (int phi = 0; phi < part.size(); ++phi) {
        double d = 0.0;
        if (mode == digdec::DivergenceMode::av) d = digdec::d_av(env, part, phi, wp.model, pi, prob.spec());
        if (mode == digdec::DivergenceMode::sq) d = digdec::d_sq(env, part, phi, wp.model, pi, prob.spec());
        D += nu[k] * rho[phi] * d;
      }
    }
    for (std::size_t o = 0; o < space.size(); ++o) {
      std::vector<double> w(part.size(), 0.0);
      double W = 0.0;
      for (int k = 0; k < part.num_world_points(); ++k) {
        double c = nu[k] * space.likelihood(part.world_point(k).model, static_cast<int>(o));
        w[part.world_point(k).infoset] += c;
        W += c;
      }
      for (int phi = 0; phi < part.size(); ++phi) {
        if (w[phi] <= 0.0) continue;
        if (rho[phi] <= 0.0) return std::nullopt;
        D += w[phi] * std::log(w[phi] / W / rho[phi]);
      }
    }
    total += p[pi] * (gain - D / eta);
  }
  return total;
}

}  // namespace fixtures
