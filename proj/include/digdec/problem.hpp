#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "digdec/divergences.hpp"
#include "digdec/environment.hpp"
#include "digdec/partition.hpp"

namespace digdec {

/**
 * Environment + partition + every table the decision rules need: per-policy
 * likelihoods over world points, regret vectors and divergence tables.
 *
 * Immutable once built; agents share it by const reference.
 */
class DecisionProblem {
 public:
  DecisionProblem(Environment env, InfosetPartition part)
      : env_(std::move(env)), part_(std::move(part)), spec_(make_estimation_spec(env_)) {
    const int n = part_.num_world_points();
    blocks_.assign(part_.size(), {0, 0});
    for (int k = 0; k < n; ++k) {
      int phi = part_.world_point(k).infoset;
      if (k > 0 && part_.world_point(k - 1).infoset > phi)
        throw InvalidArgument("world points must be grouped by infoset");
    }
    for (const auto& phi : part_.infosets())
      blocks_[phi.id] = phi.members.empty() ? std::pair<int, int>{0, 0}
                                            : std::pair<int, int>{phi.members.front(),
                                                                  static_cast<int>(phi.members.size())};
    for (int pi = 0; pi < env_.num_policies(); ++pi) {
      const auto& space = env_.observations(pi);
      Eigen::MatrixXd L(n, static_cast<Eigen::Index>(space.size()));
      Eigen::VectorXd g(n);
      for (int k = 0; k < n; ++k) {
        const auto& wp = part_.world_point(k);
        L.row(k) = space.likelihood().row(wp.model);
        g(k) = env_.value(wp.model, wp.policy) - env_.value(wp.model, pi);
      }
      lik_.push_back(std::move(L));
      regret_.push_back(std::move(g));
    }
    dbar_none_ = DivergenceTable(env_, part_, DivergenceMode::none);
    dbar_av_ = DivergenceTable(env_, part_, DivergenceMode::av);
    try {
      dbar_sq_ = DivergenceTable(env_, part_, DivergenceMode::sq);
    } catch (const NotComplete&) {
      dbar_sq_.reset();
    }
  }

  const Environment& env() const { return env_; }
  const InfosetPartition& partition() const { return part_; }
  const EstimationSpec& spec() const { return spec_; }
  int num_policies() const { return env_.num_policies(); }
  int num_world_points() const { return part_.num_world_points(); }
  int num_infosets() const { return part_.size(); }

  /// Rows: world points, columns: observations of policy pi.
  const Eigen::MatrixXd& likelihood(int pi) const { return lik_.at(pi); }
  /// V_psi(pi*_psi) - V_psi(pi) per world point.
  const Eigen::VectorXd& regret(int pi) const { return regret_.at(pi); }
  /// Contiguous (first, count) range of an infoset's world points.
  std::pair<int, int> block(int phi) const { return blocks_.at(phi); }

  bool is_complete() const { return dbar_sq_.has_value(); }

  const DivergenceTable& divergence(DivergenceMode mode) const {
    switch (mode) {
      case DivergenceMode::av: return dbar_av_;
      case DivergenceMode::none: return dbar_none_;
      case DivergenceMode::sq:
        if (!dbar_sq_) throw NotComplete("partition is not Bellman complete; sq mode unavailable");
        return *dbar_sq_;
    }
    return dbar_none_;
  }

  /// Infoset of the world point (model, comparator) or throws.
  int infoset_of(int model, int comparator) const {
    int phi = part_.find(model, comparator);
    if (phi < 0) throw InvalidArgument("world point not in the partition");
    return phi;
  }

 private:
  Environment env_;
  InfosetPartition part_;
  EstimationSpec spec_;
  std::vector<std::pair<int, int>> blocks_;
  std::vector<Eigen::MatrixXd> lik_;
  std::vector<Eigen::VectorXd> regret_;
  DivergenceTable dbar_none_, dbar_av_;
  std::optional<DivergenceTable> dbar_sq_;
};

}  // namespace digdec
