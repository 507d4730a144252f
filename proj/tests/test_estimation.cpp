#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "digdec/agents.hpp"
#include "digdec/estimation.hpp"
#include "digdec/instances.hpp"
#include "fixtures.hpp"

using namespace digdec;
using Vec = std::vector<double>;

namespace {

std::vector<double> random_simplex(std::mt19937_64& g, int n, double floor = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) s += (x = e(g) + floor);
  for (double& x : v) x /= s;
  return v;
}

/// Gradient of <rho, c> + sum_t KL(rho, q_t) + inv_gamma KL(rho, anchor).
struct MixtureObjective {
  std::vector<double> anchor, c;
  std::vector<std::vector<double>> qs;
  double inv_gamma;

  double grad(const std::vector<double>& rho, int i) const {
    double g = c[i] + inv_gamma * (std::log(rho[i] / anchor[i]) + 1.0);
    for (const auto& q : qs) g += std::log(rho[i] / q[i]) + 1.0;
    return g;
  }
};

/// Root of a decreasing-to-increasing 1-D derivative on (lo, hi) by bisection.
double bisect(double lo, double hi, const std::function<double(double)>& d) {
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    double mid = 0.5 * (lo + hi);
    (d(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Minimizer over the 2- or 3-simplex from first-order conditions only.
std::vector<double> numeric_argmin(const MixtureObjective& J) {
  const int n = static_cast<int>(J.c.size());
  if (n == 2) {
    double x = bisect(0.0, 1.0, [&](double x) {
      std::vector<double> r{x, 1 - x};
      return J.grad(r, 0) - J.grad(r, 1);
    });
    return {x, 1 - x};
  }
  auto inner = [&](double x) {
    double y = bisect(0.0, 1.0 - x, [&](double y) {
      std::vector<double> r{x, y, 1 - x - y};
      return J.grad(r, 1) - J.grad(r, 2);
    });
    return std::vector<double>{x, y, 1 - x - y};
  };
  double x = bisect(0.0, 1.0, [&](double x) {
    auto r = inner(x);
    return J.grad(r, 0) - J.grad(r, 2);
  });
  return inner(x);
}

/// One arm. Model A pays 0.8 surely; model B pays 0.3 or 0.5 with equal odds.
DecisionProblem split_arm_problem() {
  return fixtures::bandit_problem({0.3, 0.5, 0.8}, {{{0.0, 0.0, 1.0}}, {{0.5, 0.5, 0.0}}});
}

Trajectory arm_reward(int r) { return Trajectory{{0}, {0}, {r}}; }

}  // namespace

TEST(Bayes, ThirdArmMakesTheBeliefDeterministic) {
  auto t = make_toy_bandit(256, 0.5);
  auto prob = toy_problem(256, 0.5);
  const auto& space = prob.env().observations(2);
  const int phi1 = prob.partition().find(0, 1), phi2 = prob.partition().find(1, 0);
  for (std::size_t o = 0; o < space.size(); ++o) {
    auto rho = bayes_update(prob, Vec{0.5, 0.5}, 2, static_cast<int>(o));
    double r = prob.env().reward_values()[space.at(o).rewards[0]];
    int truth = r == 0.5 * t.epsilon ? phi2 : phi1;
    EXPECT_DOUBLE_EQ(rho[truth], 1.0);
  }
}

TEST(EpochLoss, ZeroResidualsGiveZeroLoss) {
  auto prob = fixtures::bandit_problem({0.5}, {{{1.0}}});
  std::vector<Trajectory> obs(4, arm_reward(0));
  EXPECT_EQ(epoch_loss(prob, obs), std::vector<double>{0.0});
}

TEST(EpochLoss, SplitProductOfHalfMeans) {
  // f = 0.8, rewards 0.3 then 0.5: half-means 0.5 and 0.3, tau = 2.
  auto prob = split_arm_problem();
  const int phiA = prob.partition().find(0, 0);
  auto L = epoch_loss(prob, {arm_reward(0), arm_reward(1)});
  EXPECT_NEAR(L[phiA], 0.3, 1e-15);
}

TEST(EpochLoss, OddEpochIsRejected) {
  auto prob = split_arm_problem();
  EXPECT_THROW(epoch_loss(prob, {arm_reward(0), arm_reward(1), arm_reward(0)}), OddEpoch);
  EXPECT_THROW(EpochEngine(prob, 100, 0.01, 3), OddEpoch);
}

TEST(EpochLoss, UnbiasedUnderAFixedModel) {
  // Under model B, E[l(phi_A)] = 0.8 - 0.4, so E[L] = tau * 0.16.
  auto prob = split_arm_problem();
  const int phiA = prob.partition().find(0, 0);
  const int tau = 4, epochs = 100000;
  Rng rng(77);
  double s = 0.0, s2 = 0.0;
  std::vector<Trajectory> buf(tau);
  for (int k = 0; k < epochs; ++k) {
    for (auto& tr : buf) tr = prob.env().observations(0).at(prob.env().sample_observation(1, 0, rng));
    double L = epoch_loss(prob, buf)[phiA];
    s += L;
    s2 += L * L;
  }
  double mean = s / epochs, sd = std::sqrt((s2 / epochs - mean * mean) / epochs);
  EXPECT_NEAR(mean, tau * 0.16, 4 * sd);
}

TEST(EpochEngineParams, DerivedFromTheHorizon) {
  EXPECT_EQ(epoch_length(1), 2);
  EXPECT_EQ(epoch_length(27), 4);
  EXPECT_EQ(epoch_length(512), 8);
  EXPECT_EQ(epoch_length(1024), 10);
  EXPECT_EQ(epoch_length(4096), 16);
  auto prob = stochastic_chain_complete_problem();
  EpochEngine e(prob, 1000);
  EXPECT_EQ(e.tau(), 10);
  EXPECT_EQ(e.num_epochs(), 100);
  EXPECT_NEAR(e.iota(), std::log(12.0 * 1 * 100 * 2 / 0.01), 1e-12);
  EXPECT_NEAR(e.beta(), 7.0 * 10 * 1 * e.iota(), 1e-12);
  EXPECT_NEAR(e.gamma(), 1.0 / (2.0 * e.beta()), 1e-15);
}

TEST(EpochEngineRun, LossStaysInRangeAndShortEpochIsIgnored) {
  auto prob = stochastic_chain_complete_problem();
  const int T = 42;
  EpochEngine e(prob, T, 0.01, 4);
  ASSERT_EQ(e.num_epochs(), 10);
  Rng rng(3);
  auto nu = fixtures::uniform(prob.num_world_points());
  std::vector<double> before;
  for (int t = 1; t <= T; ++t) {
    int pi = t % prob.num_policies();
    int o = prob.env().sample_observation(0, pi, rng);
    before = e.rho();
    bool changed = e.observe(nu, pi, o);
    EXPECT_EQ(changed, t % 4 == 0 && t <= 40) << "round " << t;
    if (!changed) EXPECT_EQ(e.rho(), before);
    EXPECT_NEAR(std::accumulate(e.rho().begin(), e.rho().end(), 0.0), 1.0, 1e-9);
  }
  EXPECT_EQ(e.epochs_done(), 10);
  EXPECT_LE(e.max_loss_ratio(), 1.0);
}

TEST(EpochEngineRun, UpdateIsTheClosedFormOfTheEpoch) {
  auto prob = stochastic_chain_complete_problem();
  for (bool terms : {true, false}) {
    EpochEngine e(prob, 64, 0.01, 4, terms);
    Rng rng(8);
    std::mt19937_64 g(8);
    auto nu = random_simplex(g, prob.num_world_points(), 0.05);
    std::vector<Trajectory> obs;
    std::vector<std::vector<double>> qs;
    auto anchor = e.rho();
    for (int t = 0; t < 4; ++t) {
      int pi = (3 * t + 1) % prob.num_policies();
      int o = prob.env().sample_observation(2, pi, rng);
      obs.push_back(prob.env().observations(pi).at(o));
      qs.push_back(posterior_infoset(prob.env(), prob.partition(), nu, pi, o));
      e.observe(nu, pi, o);
    }
    auto L = epoch_loss(prob, obs);
    std::vector<double> c(L.size());
    for (std::size_t i = 0; i < L.size(); ++i) c[i] = L[i] + (4 * e.gamma() + 2 / e.beta()) * L[i] * L[i];
    auto expect = geometric_mixture(anchor, 1 / e.gamma(), terms ? qs : std::vector<std::vector<double>>{}, c);
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(e.rho()[i], expect[i], 1e-14);
  }
}

TEST(GeometricMixture, FixedPoint) {
  std::vector<double> rho{0.2, 0.5, 0.3};
  auto next = geometric_mixture(rho, 40.0, {rho, rho, rho}, std::vector<double>(3, 0.0));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(next[i], rho[i], 1e-15);
}

TEST(GeometricMixture, MatchesNumericArgmin) {
  std::mt19937_64 g(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n : {2, 3})
    for (double gamma : {0.1, 1.0, 10.0})
      for (int qcount : {0, 1, 4}) {
        MixtureObjective J;
        J.anchor = random_simplex(g, n, 0.05);
        J.inv_gamma = 1.0 / gamma;
        for (int i = 0; i < n; ++i) J.c.push_back(u(g));
        for (int t = 0; t < qcount; ++t) J.qs.push_back(random_simplex(g, n, 0.05));
        auto closed = geometric_mixture(J.anchor, J.inv_gamma, J.qs, J.c);
        auto numeric = numeric_argmin(J);
        for (int i = 0; i < n; ++i) EXPECT_NEAR(closed[i], numeric[i], 1e-8) << "n=" << n << " gamma=" << gamma;
      }
}

TEST(GeometricMixture, LargeGammaApproachesTheGeometricMeanOfPosteriors) {
  std::vector<double> anchor{0.7, 0.2, 0.1};
  std::vector<std::vector<double>> qs{{0.2, 0.3, 0.5}, {0.4, 0.4, 0.2}};
  std::vector<double> zero(3, 0.0);
  std::vector<double> gm(3);
  for (int i = 0; i < 3; ++i) gm[i] = std::sqrt(qs[0][i] * qs[1][i]);
  double s = gm[0] + gm[1] + gm[2];
  for (double& x : gm) x /= s;
  double prev = 1e9;
  for (double gamma : {0.1, 1.0, 10.0, 1e6}) {
    auto r = geometric_mixture(anchor, 1.0 / gamma, qs, zero);
    double dist = 0.0;
    for (int i = 0; i < 3; ++i) dist += std::abs(r[i] - gm[i]);
    EXPECT_LT(dist, prev);
    prev = dist;
  }
  EXPECT_LT(prev, 1e-5);
}

TEST(Bilevel, FirstBonusIsIota) {
  auto prob = stochastic_chain_complete_problem();
  BilevelEngine e(prob);
  EXPECT_NEAR(e.iota(), 64.0 * std::log(static_cast<double>(prob.num_infosets())), 1e-12);
  EXPECT_NEAR(e.gamma(), 1.0 / (4.0 * e.iota()), 1e-15);
  Rng rng(1);
  auto nu = fixtures::uniform(prob.num_world_points());
  int o = prob.env().sample_observation(0, 0, rng);
  e.observe(nu, 0, o);
  for (double b : e.last_bonus()) EXPECT_DOUBLE_EQ(b, e.iota());
}

TEST(Bilevel, FirstLossIsCenteredAgainstUniformInner) {
  auto prob = stochastic_chain_complete_problem();
  BilevelEngine e(prob);
  Rng rng(2);
  auto nu = fixtures::uniform(prob.num_world_points());
  int o = prob.env().sample_observation(1, 3, rng);
  auto D = e.squared_losses(prob.env().observations(3).at(o));
  e.observe(nu, 3, o);
  const int n = prob.num_infosets();
  for (int phi = 0; phi < n; ++phi) EXPECT_NEAR(e.last_loss()[phi], D(phi, phi) - D.col(phi).mean(), 1e-14);
}

TEST(Bilevel, TopUpdateMatchesNumericArgmin) {
  // A three-infoset instance: the three-world bandit.
  auto prob = three_world_bandit();
  ASSERT_EQ(prob.num_infosets(), 3);
  BilevelEngine e(prob);
  Rng rng(4);
  std::mt19937_64 g(4);
  for (int t = 0; t < 5; ++t) {
    auto nu = random_simplex(g, 3, 0.05);
    int pi = t % 3;
    int o = prob.env().sample_observation(t % 3, pi, rng);
    auto rho = e.rho();
    std::vector<double> runmax = e.running_max();
    auto q = e.inner();
    auto D = e.squared_losses(prob.env().observations(pi).at(o));
    MixtureObjective J;
    J.anchor = rho;
    J.inv_gamma = 1.0 / e.gamma();
    J.qs = {posterior_infoset(prob.env(), prob.partition(), nu, pi, o)};
    for (int phi = 0; phi < 3; ++phi) {
      double L = D(phi, phi) - q.col(phi).dot(D.col(phi));
      double b = e.iota() * std::max(rho[phi] - runmax[phi], 0.0) / rho[phi];
      J.c.push_back(L + 4 * e.gamma() * L * L + b);
    }
    e.observe(nu, pi, o);
    auto numeric = numeric_argmin(J);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.rho()[i], numeric[i], 1e-8);
  }
}

TEST(Bilevel, BonusIdentityAndMonotoneRates) {
  auto prob = stochastic_chain_complete_problem();
  Agent agent(prob, AgentConfig::dig_dec(DivergenceMode::sq, 1.0), 60);
  World world = World::stochastic(3);
  Rng rng(12);
  std::vector<RoundLog> hist;
  std::vector<double> prev_alpha(prob.num_infosets(), std::numeric_limits<double>::infinity());
  const double iota = agent.bilevel_engine()->iota();
  for (int t = 1; t <= 60; ++t) {
    hist.push_back(agent_step(agent, prob, world, t, hist, rng));
    const auto* e = agent.bilevel_engine();
    for (double b : e->last_bonus()) {
      EXPECT_GE(b, 0.0);
      EXPECT_LE(b, iota + 1e-12);
    }
    auto a = e->alpha();
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_LE(a[i], prev_alpha[i]);
      prev_alpha[i] = a[i];
    }
    for (int phi = 0; phi < prob.num_infosets(); ++phi)
      EXPECT_NEAR(e->inner().col(phi).sum(), 1.0, 1e-12);
  }
  const auto* e = agent.bilevel_engine();
  double max_sum = 0.0;
  for (double m : e->running_max()) max_sum += m;
  const double lhs = 0.5 * e->bonus_mass();
  const double rhs = 32.0 * std::log(static_cast<double>(prob.num_infosets())) * max_sum;
  EXPECT_NEAR(lhs, rhs, 1e-9 * rhs);
}

TEST(Est, SingleInfosetIsZero) {
  auto prob = fixtures::bandit_problem({0.0, 0.5, 1.0}, {{{0.8, 0.0, 0.2}, {0.3, 0.0, 0.7}},
                                                         {{0.6, 0.4, 0.0}, {0.3, 0.0, 0.7}}});
  ASSERT_EQ(prob.num_infosets(), 1);
  for (int m = 0; m < 2; ++m) {
    auto e = est_round(prob, Vec{0.4, 0.6}, Vec{1.0}, Vec{0.3, 0.7}, m, 0, DivergenceMode::av);
    EXPECT_NEAR(e.kl, 0.0, 1e-15);
    EXPECT_NEAR(e.div, 0.0, 1e-15);
  }
}

TEST(Est, RhoEqualToEveryPosteriorCancelsTheLogTerm) {
  // Arm 0 has the same law under both models: every posterior is the nu-marginal.
  auto prob = fixtures::bandit_problem({0.0, 1.0}, {{{0.4, 0.6}, {0.9, 0.1}}, {{0.4, 0.6}, {0.1, 0.9}}});
  std::vector<double> nu{0.3, 0.7};
  std::vector<double> rho(2);
  for (int phi = 0; phi < 2; ++phi)
    for (int k : prob.partition().infoset(phi).members) rho[phi] += nu[k];
  auto e = est_round(prob, Vec{1.0, 0.0}, rho, nu, 0, prob.partition().world_point(0).infoset, DivergenceMode::av);
  EXPECT_NEAR(e.kl, 0.0, 1e-15);
}
