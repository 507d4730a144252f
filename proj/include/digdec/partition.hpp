#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "digdec/environment.hpp"
#include "digdec/errors.hpp"
#include "digdec/mdp.hpp"

namespace digdec {

inline constexpr double kGroupingTolerance = 1e-8;

/// (model, comparator policy) pair and the infoset that owns it.
struct WorldPoint {
  int model = 0;
  int policy = 0;
  int infoset = 0;
};

/**
 * Infoset: one policy, a set of world points and the value tables f_phi.
 *
 * Stochastic infosets carry a single table (the shared Q*), hybrid ones carry
 * d tables f_phi(.,.;e_j), one per feature coordinate used as reward.
 */
struct Infoset {
  int id = 0;
  int policy = 0;
  std::vector<int> members;        ///< world point indices
  std::vector<int> member_models;  ///< model ids (stochastic) or transition ids (hybrid)
  std::vector<std::vector<double>> tables;
  std::vector<std::vector<double>> state_values;  ///< f_phi(s) per table
  double value = std::numeric_limits<double>::quiet_NaN();  ///< V_phi(pi_phi), stochastic only

  int num_components() const { return static_cast<int>(tables.size()); }
};

class InfosetPartition {
 public:
  InfosetPartition() = default;
  InfosetPartition(Setting setting, std::vector<Infoset> infosets, std::vector<WorldPoint> points)
      : setting_(setting), infosets_(std::move(infosets)), points_(std::move(points)) {
    check();
  }

  Setting setting() const { return setting_; }
  int size() const { return static_cast<int>(infosets_.size()); }
  int num_world_points() const { return static_cast<int>(points_.size()); }
  const Infoset& infoset(int i) const { return infosets_.at(i); }
  const std::vector<Infoset>& infosets() const { return infosets_; }
  const WorldPoint& world_point(int i) const { return points_.at(i); }
  const std::vector<WorldPoint>& world_points() const { return points_; }
  int num_components() const { return infosets_.front().num_components(); }

  /// Infoset holding the world point (model, policy), or -1.
  int find(int model, int policy) const {
    for (const auto& w : points_)
      if (w.model == model && w.policy == policy) return w.infoset;
    return -1;
  }

  /// Structural checks: disjointness, coverage, one policy per infoset.
  void check() const {
    if (infosets_.empty()) throw InvalidArgument("partition has no infosets");
    std::vector<int> owner(points_.size(), -1);
    for (std::size_t i = 0; i < infosets_.size(); ++i) {
      const auto& phi = infosets_[i];
      if (phi.id != static_cast<int>(i)) throw InvalidArgument("infoset ids must be positional");
      if (phi.tables.empty() || phi.tables.size() != phi.state_values.size())
        throw InvalidArgument("infoset without value tables");
      for (int w : phi.members) {
        if (w < 0 || w >= static_cast<int>(points_.size()))
          throw InvalidArgument("member index out of range");
        if (owner[w] != -1) throw InvalidArgument("infosets are not disjoint");
        owner[w] = static_cast<int>(i);
        if (points_[w].infoset != static_cast<int>(i))
          throw InvalidArgument("world point points to a different infoset");
        if (setting_ == Setting::hybrid && points_[w].policy != phi.policy)
          throw InvalidArgument("hybrid infoset mixes comparator policies");
      }
    }
    for (int o : owner)
      if (o == -1) throw InvalidArgument("world point not covered by any infoset");
  }

 private:
  Setting setting_ = Setting::stochastic;
  std::vector<Infoset> infosets_;
  std::vector<WorldPoint> points_;
};

inline bool tables_match(std::span<const double> a, std::span<const double> b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

namespace detail {

/// Reorders world points so each infoset's members are contiguous.
inline InfosetPartition assemble(Setting setting, std::vector<Infoset> infosets,
                                 const std::vector<WorldPoint>& raw) {
  std::vector<WorldPoint> points;
  for (auto& phi : infosets) {
    std::vector<int> fresh;
    for (int w : phi.members) {
      fresh.push_back(static_cast<int>(points.size()));
      points.push_back(raw[w]);
      points.back().infoset = phi.id;
    }
    phi.members = std::move(fresh);
  }
  return InfosetPartition(setting, std::move(infosets), std::move(points));
}

inline Infoset stochastic_infoset(const Environment& env, int id, std::vector<double> table,
                                  double tol) {
  const Layout& L = env.layout();
  Infoset phi;
  phi.id = id;
  phi.policy = env.find_policy(greedy_policy(L, table, tol * 1e-4));
  phi.state_values.push_back(state_max(L, table));
  phi.value = phi.state_values[0][0];
  phi.tables.push_back(std::move(table));
  return phi;
}

}  // namespace detail

/// Groups models by their Q* tables; each group's comparator is its greedy policy.
inline InfosetPartition build_partition_stochastic(const Environment& env,
                                                   double tol = kGroupingTolerance) {
  if (env.setting() != Setting::stochastic) throw InvalidArgument("expected a stochastic instance");
  std::vector<Infoset> infosets;
  std::vector<WorldPoint> raw;
  for (int m = 0; m < env.num_models(); ++m) {
    auto q = q_star(env.model(m));
    int found = -1;
    for (auto& phi : infosets)
      if (tables_match(phi.tables[0], q, tol)) {
        found = phi.id;
        break;
      }
    if (found < 0) {
      found = static_cast<int>(infosets.size());
      infosets.push_back(detail::stochastic_infoset(env, found, std::move(q), tol));
    }
    auto& phi = infosets[found];
    phi.members.push_back(static_cast<int>(raw.size()));
    phi.member_models.push_back(m);
    raw.push_back({m, phi.policy, found});
  }
  return detail::assemble(Setting::stochastic, std::move(infosets), raw);
}

/// Stochastic Bellman image table: R_M(s,a) + E_{s'~P_M}[f_phi(s')].
inline std::vector<std::vector<double>> bellman_backup_tables(const Environment& env, int model,
                                                              const Infoset& phi) {
  const TabularMdp& M = env.model(model);
  std::vector<std::vector<double>> out;
  if (env.setting() == Setting::stochastic) {
    out.push_back(bellman_backup(M, M.mean_rewards(), phi.state_values[0]));
  } else {
    const FeatureMap& F = env.features();
    for (int j = 0; j < F.dim(); ++j)
      out.push_back(bellman_backup(M, F.component(env.layout(), j), phi.state_values[j]));
  }
  return out;
}

/**
 * Closes a stochastic partition under every T_M by adding (possibly empty)
 * infosets for backups that match no existing table.
 */
inline InfosetPartition complete_partition(const Environment& env, const InfosetPartition& base,
                                           double tol = kGroupingTolerance,
                                           std::size_t max_infosets = 64) {
  if (env.setting() != Setting::stochastic)
    throw InvalidArgument("completion is defined for stochastic partitions");
  std::vector<Infoset> infosets = base.infosets();
  std::vector<WorldPoint> raw = base.world_points();
  for (std::size_t i = 0; i < infosets.size(); ++i) {
    for (int m = 0; m < env.num_models(); ++m) {
      auto img = bellman_backup_tables(env, m, infosets[i]);
      bool hit = false;
      for (const auto& psi : infosets)
        if (tables_match(psi.tables[0], img[0], tol)) {
          hit = true;
          break;
        }
      if (hit) continue;
      if (infosets.size() >= max_infosets)
        throw CapExceeded("Bellman closure exceeds " + std::to_string(max_infosets) + " infosets");
      infosets.push_back(
          detail::stochastic_infoset(env, static_cast<int>(infosets.size()), std::move(img[0]), tol));
    }
  }
  return InfosetPartition(Setting::stochastic, std::move(infosets), std::move(raw));
}

/**
 * Hybrid partition: for each policy, transitions are grouped by their d*H
 * per-layer basis value tables; each infoset is (policy, group) x all rewards.
 */
inline InfosetPartition build_partition_hybrid(const Environment& env,
                                               double tol = kGroupingTolerance) {
  if (env.setting() != Setting::hybrid) throw InvalidArgument("expected a hybrid instance");
  const Layout& L = env.layout();
  const FeatureMap& F = env.features();
  const int d = F.dim(), H = L.horizon();

  auto layer_tables = [&](int P, int pi) {
    const TabularMdp& M = env.model(env.model_index(P, 0));
    std::vector<std::vector<double>> t;
    for (int j = 0; j < d; ++j)
      for (int h = 0; h < H; ++h) t.push_back(q_policy(M, env.policy(pi), F.component(L, j, h)));
    return t;
  };

  // A reward outside the basis directions, used for the shared-value check.
  std::vector<double> probe(L.num_sa(), 0.0);
  for (int sa = 0; sa < L.num_sa(); ++sa)
    for (int j = 0; j < d; ++j) probe[sa] += F.at(sa)[j] / (j + 2.0);

  std::vector<Infoset> infosets;
  std::vector<WorldPoint> raw;
  for (int pi = 0; pi < env.num_policies(); ++pi) {
    std::vector<std::vector<std::vector<double>>> reps;
    std::vector<int> group_of_rep;
    for (int P = 0; P < env.num_transitions(); ++P) {
      auto t = layer_tables(P, pi);
      int found = -1;
      for (std::size_t g = 0; g < reps.size() && found < 0; ++g) {
        bool same = true;
        for (std::size_t k = 0; k < t.size() && same; ++k) same = tables_match(reps[g][k], t[k], tol);
        if (same) found = group_of_rep[g];
      }
      if (found < 0) {
        found = static_cast<int>(infosets.size());
        Infoset phi;
        phi.id = found;
        phi.policy = pi;
        const TabularMdp& M = env.model(env.model_index(P, 0));
        for (int j = 0; j < d; ++j) {
          phi.tables.push_back(q_policy(M, env.policy(pi), F.component(L, j)));
          phi.state_values.push_back(state_average(L, env.policy(pi), phi.tables.back()));
        }
        infosets.push_back(std::move(phi));
        reps.push_back(std::move(t));
        group_of_rep.push_back(found);
      }
      auto& phi = infosets[found];
      phi.member_models.push_back(P);
      for (int r = 0; r < env.num_rewards(); ++r) {
        phi.members.push_back(static_cast<int>(raw.size()));
        raw.push_back({env.model_index(P, r), pi, found});
      }
    }
  }

  // Members must agree on Q^{pi_phi} for every reward in the class and a probe.
  for (const auto& phi : infosets) {
    if (phi.member_models.size() < 2) continue;
    const Policy& pol = env.policy(phi.policy);
    for (std::size_t k = 1; k < phi.member_models.size(); ++k) {
      const TabularMdp& A = env.model(env.model_index(phi.member_models[0], 0));
      const TabularMdp& B = env.model(env.model_index(phi.member_models[k], 0));
      std::vector<std::vector<double>> rewards{probe};
      for (int r = 0; r < env.num_rewards(); ++r) rewards.push_back(env.model(r).mean_rewards());
      for (const auto& R : rewards)
        if (!tables_match(q_policy(A, pol, R), q_policy(B, pol, R), tol))
          throw SharedValueViolated("transitions " + std::to_string(phi.member_models[0]) + " and " +
                                    std::to_string(phi.member_models[k]) + " disagree under policy " +
                                    std::to_string(phi.policy));
    }
  }
  return detail::assemble(Setting::hybrid, std::move(infosets), raw);
}

/// Value of pi_phi under reward r (hybrid: f_phi(s_1; R)).
inline double hybrid_infoset_value(const Environment& env, const Infoset& phi, int reward) {
  const TabularMdp& M = env.model(env.model_index(phi.member_models.at(0), reward));
  return policy_value(M, env.policy(phi.policy));
}

}  // namespace digdec
