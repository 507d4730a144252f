#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "digdec/errors.hpp"

namespace digdec {

inline constexpr double kProbTolerance = 1e-9;

/**
 * Probability table over a finite, ordered set of distinct outcomes.
 *
 * Outcomes are identified by their position; an optional real label per
 * outcome is kept for reward laws.
 */
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;

  explicit DiscreteDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    validate();
  }

  DiscreteDistribution(std::vector<double> labels, std::vector<double> probs)
      : labels_(std::move(labels)), probs_(std::move(probs)) {
    if (labels_.size() != probs_.size())
      throw InvalidArgument("support and probs differ in length");
    for (std::size_t i = 0; i < labels_.size(); ++i)
      for (std::size_t j = i + 1; j < labels_.size(); ++j)
        if (labels_[i] == labels_[j]) throw InvalidArgument("support entries are not distinct");
    validate();
  }

  static DiscreteDistribution uniform(std::size_t n) {
    return DiscreteDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static DiscreteDistribution point_mass(std::size_t n, std::size_t at) {
    std::vector<double> p(n, 0.0);
    p.at(at) = 1.0;
    return DiscreteDistribution(std::move(p));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& labels() const { return labels_; }

  double mean() const {
    if (labels_.empty()) throw InvalidArgument("mean of an unlabelled distribution");
    double m = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) m += labels_[i] * probs_[i];
    return m;
  }

 private:
  void validate() const {
    if (probs_.empty()) throw InvalidArgument("empty distribution");
    double s = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0)) throw InvalidArgument("negative or NaN probability");
      s += p;
    }
    if (std::abs(s - 1.0) > kProbTolerance)
      throw InvalidArgument("probabilities sum to " + std::to_string(s));
  }

  std::vector<double> labels_;
  std::vector<double> probs_;
};

/// True when `p` is a probability vector within `tol`.
inline bool is_distribution(std::span<const double> p, double tol = kProbTolerance) {
  if (p.empty()) return false;
  double s = 0.0;
  for (double x : p) {
    if (!(x >= -tol)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

inline void require_distribution(std::span<const double> p, const char* what) {
  if (!is_distribution(p)) throw InvalidArgument(std::string(what) + " is not a distribution");
}

/// Rescale a nonnegative vector to sum to one. Throws on zero mass.
inline std::vector<double> normalized(std::vector<double> w) {
  double s = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(s > 0.0)) throw ZeroEvidence("cannot normalize a vector with zero mass");
  for (double& x : w) x /= s;
  return w;
}

/// Normalize log-weights; entries equal to -inf receive probability zero.
inline std::vector<double> softmax_logs(std::span<const double> logw) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : logw) mx = std::max(mx, x);
  if (!std::isfinite(mx)) throw ZeroEvidence("all log-weights are -inf");
  std::vector<double> out(logw.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    out[i] = std::isfinite(logw[i]) ? std::exp(logw[i] - mx) : 0.0;
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

/// Total variation distance.
inline double total_variation(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace digdec
