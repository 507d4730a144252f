#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "digdec/bench.hpp"
#include "digdec/saddle.hpp"
#include "fixtures.hpp"

using namespace digdec;
using Vec = std::vector<double>;

namespace {

constexpr int kThirdArm = 2;

std::vector<double> random_simplex(std::mt19937_64& g, int n, double floor = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) s += (x = e(g) + floor);
  for (double& x : v) x /= s;
  return v;
}

std::vector<double> delta(int n, int i) {
  std::vector<double> v(n, 0.0);
  v[i] = 1.0;
  return v;
}

DecisionProblem three_point_problem() {
  return fixtures::bandit_problem({0.0, 0.5, 1.0}, {{{0.5, 0.0, 0.5}, {0.6, 0.4, 0.0}},
                                                    {{0.0, 1.0, 0.0}, {0.5, 0.4, 0.1}},
                                                    {{0.7, 0.2, 0.1}, {0.2, 0.2, 0.6}}});
}

/// min over a p-grid of max over a nu-grid for a 2-policy, 2-point game, using
/// that the objective is affine in p.
double brute_minmax_2x2(const DecisionProblem& prob, const std::vector<double>& rho, double eta, DivergenceMode mode,
                        int res) {
  std::vector<double> a0(res + 1), a1(res + 1);
  for (int j = 0; j <= res; ++j) {
    std::vector<double> nu{static_cast<double>(j) / res, 1.0 - static_cast<double>(j) / res};
    auto v0 = fixtures::brute_air(prob, {1.0, 0.0}, nu, rho, eta, mode);
    auto v1 = fixtures::brute_air(prob, {0.0, 1.0}, nu, rho, eta, mode);
    a0[j] = v0.value_or(-std::numeric_limits<double>::infinity());
    a1[j] = v1.value_or(-std::numeric_limits<double>::infinity());
  }
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= res; ++i) {
    double p = static_cast<double>(i) / res, worst = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= res; ++j) worst = std::max(worst, p * a0[j] + (1 - p) * a1[j]);
    best = std::min(best, worst);
  }
  return best;
}

/// Optimistic payoff c_pi(psi) rebuilt from infoset values and d_av.
std::vector<std::vector<double>> optimistic_matrix(const DecisionProblem& prob, const std::vector<double>& rho,
                                                   double eta) {
  const auto& part = prob.partition();
  double vbar = 0.0;
  for (int phi = 0; phi < part.size(); ++phi)
    vbar += rho[phi] * prob.env().value(part.infoset(phi).member_models[0], part.infoset(phi).policy);
  std::vector<std::vector<double>> c(prob.num_policies(), std::vector<double>(part.num_world_points()));
  for (int pi = 0; pi < prob.num_policies(); ++pi)
    for (int k = 0; k < part.num_world_points(); ++k) {
      int m = part.world_point(k).model;
      double d = 0.0;
      for (int phi = 0; phi < part.size(); ++phi) d += rho[phi] * d_av(prob.env(), part, phi, m, pi, prob.spec());
      c[pi][k] = vbar - d / eta - prob.env().value(m, pi);
    }
  return c;
}

}  // namespace

TEST(AirValue, TrivialInstanceIsZero) {
  auto prob = fixtures::bandit_problem({0.0, 1.0}, {{{0.3, 0.7}}});
  for (double eta : {0.1, 1.0, 10.0})
    for (auto mode : {DivergenceMode::av, DivergenceMode::sq, DivergenceMode::none})
      EXPECT_NEAR(*air_value(prob, Vec{1.0}, Vec{1.0}, Vec{1.0}, eta, mode), 0.0, 1e-15);
}

TEST(AirValue, ToyThirdArmClosedForm) {
  auto t = make_toy_bandit(256, 0.5);
  auto prob = toy_problem(256, 0.5);
  for (double eta : {0.5, 1.0, 2.0}) {
    double v = *air_value(prob, delta(3, kThirdArm), Vec{0.5, 0.5}, Vec{0.5, 0.5}, eta, DivergenceMode::none);
    EXPECT_NEAR(v, t.p_plus - 0.5 * t.epsilon - std::log(2.0) / eta, 1e-14);
  }
}

TEST(AirValue, MatchesStraightLineRecomputation) {
  std::mt19937_64 g(7);
  for (const auto& prob : {three_point_problem(), stochastic_chain_complete_problem()}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto p = random_simplex(g, prob.num_policies());
      auto nu = random_simplex(g, prob.num_world_points());
      auto rho = random_simplex(g, prob.num_infosets(), 0.05);
      for (auto mode : {DivergenceMode::av, DivergenceMode::none}) {
        auto a = air_value(prob, p, nu, rho, 0.7, mode);
        auto b = fixtures::brute_air(prob, p, nu, rho, 0.7, mode);
        ASSERT_TRUE(a && b);
        EXPECT_NEAR(*a, *b, 1e-11);
      }
    }
  }
}

TEST(AirValue, MissingRhoSupportIsMinusInfinity) {
  auto prob = toy_problem(256, 0.5);
  EXPECT_FALSE(air_value(prob, delta(3, kThirdArm), Vec{0.5, 0.5}, Vec{1.0, 0.0}, 1.0, DivergenceMode::none));
}

TEST(BestResponsePolicy, ToyPicksTheThirdArm) {
  auto prob = toy_problem(256, 0.5);
  for (double eta : {0.25, 0.5, 1.0})
    for (auto mode : {DivergenceMode::av, DivergenceMode::sq, DivergenceMode::none})
      EXPECT_EQ(best_response_policy(prob, Vec{0.5, 0.5}, Vec{0.5, 0.5}, eta, mode).first, kThirdArm);
}

TEST(BestResponsePolicy, SinglePolicy) {
  auto prob = fixtures::bandit_problem({0.0, 1.0}, {{{0.3, 0.7}}, {{0.6, 0.4}}});
  EXPECT_EQ(best_response_policy(prob, Vec{0.5, 0.5}, Vec{0.5, 0.5}, 1.0, DivergenceMode::av).first, 0);
}

TEST(BestResponsePolicy, AgreesWithAScan) {
  std::mt19937_64 g(9);
  auto prob = stochastic_chain_complete_problem();
  for (int trial = 0; trial < 5; ++trial) {
    auto nu = random_simplex(g, prob.num_world_points());
    auto rho = random_simplex(g, prob.num_infosets(), 0.05);
    int best = -1;
    double bv = std::numeric_limits<double>::infinity();
    for (int pi = 0; pi < prob.num_policies(); ++pi) {
      double v = *fixtures::brute_air(prob, delta(prob.num_policies(), pi), nu, rho, 1.0, DivergenceMode::sq);
      if (v < bv - 1e-12) {
        bv = v;
        best = pi;
      }
    }
    auto [pi, v] = best_response_policy(prob, nu, rho, 1.0, DivergenceMode::sq);
    EXPECT_EQ(pi, best);
    EXPECT_NEAR(v, bv, 1e-10);
  }
}

TEST(BestResponseWorld, SinglePoint) {
  auto prob = fixtures::bandit_problem({0.0, 1.0}, {{{0.3, 0.7}, {0.5, 0.5}}});
  auto r = best_response_world(prob, Vec{0.5, 0.5}, Vec{1.0}, 1.0, DivergenceMode::av);
  ASSERT_EQ(r.nu.size(), 1u);
  EXPECT_DOUBLE_EQ(r.nu[0], 1.0);
}

TEST(BestResponseWorld, ToyWorstCaseSplitsTheInfosets) {
  auto prob = toy_problem(256, 0.5);
  std::vector<double> rho{0.5, 0.5};
  auto sp = solve_minimax(prob, rho, 1.0, DivergenceMode::sq);
  auto r = best_response_world(prob, sp.p, rho, 1.0, DivergenceMode::sq, 3);
  EXPECT_NEAR(r.nu[0], 0.5, 1e-3);
  EXPECT_NEAR(r.nu[1], 0.5, 1e-3);
}

TEST(BestResponseWorld, AgreesWithAGridOnThreePoints) {
  std::mt19937_64 g(13);
  auto prob = three_point_problem();
  for (int trial = 0; trial < 5; ++trial) {
    auto p = random_simplex(g, 2);
    auto rho = random_simplex(g, 2, 0.05);
    auto r = best_response_world(prob, p, rho, 1.0, DivergenceMode::av, 3, {}, true);
    ASSERT_TRUE(r.grid_value.has_value());
    EXPECT_GE(r.value, *r.grid_value - 1e-9);
    EXPECT_LE(r.value - *r.grid_value, 1e-3);
    EXPECT_FALSE(r.non_improvement);
  }
}

TEST(SolveMinimax, ToyPlaysTheThirdArm) {
  auto prob = toy_problem(256, 0.5);
  for (auto mode : {DivergenceMode::av, DivergenceMode::sq}) {
    auto sp = solve_minimax(prob, Vec{0.5, 0.5}, 1.0, mode);
    EXPECT_GE(sp.p[kThirdArm], 0.99);
    EXPECT_TRUE(sp.gap_met);
  }
}

TEST(SolveMinimax, TwoByTwoMatchesBruteForce) {
  auto prob = two_world_bandit();
  for (const auto& rho : {std::vector<double>{0.5, 0.5}, std::vector<double>{0.8, 0.2}})
    for (double eta : {0.5, 1.0, 2.0}) {
      auto sp = solve_minimax(prob, rho, eta, DivergenceMode::sq);
      EXPECT_NEAR(sp.air_value, brute_minmax_2x2(prob, rho, eta, DivergenceMode::sq, 1000), 2e-3);
    }
}

TEST(SolveMinimax, GapIsCertified) {
  std::vector<DecisionProblem> probs;
  probs.push_back(toy_problem(256, 0.5));
  probs.push_back(two_world_bandit());
  probs.push_back(three_world_bandit());
  probs.push_back(stochastic_chain_complete_problem());
  for (const auto& prob : probs) {
    auto rho = fixtures::uniform(prob.num_infosets());
    for (auto mode : {DivergenceMode::av, DivergenceMode::sq}) {
      auto sp = solve_minimax(prob, rho, 1.0, mode);
      EXPECT_GE(sp.gap, 0.0);
      EXPECT_LE(sp.gap, 1e-4);
      EXPECT_LE(sp.lower, sp.air_value + 1e-12);
      EXPECT_GE(sp.upper, sp.air_value - 1e-12);
    }
  }
}

TEST(SolveMinimax, CertificateBoundsEveryGridWorld) {
  auto prob = three_point_problem();
  ASSERT_EQ(prob.num_infosets(), 3);
  std::vector<double> rho{0.2, 0.3, 0.5};
  auto sp = solve_minimax(prob, rho, 1.0, DivergenceMode::av);
  const int res = 50;
  for (int i = 0; i <= res; ++i)
    for (int j = 0; i + j <= res; ++j) {
      std::vector<double> nu{double(i) / res, double(j) / res, double(res - i - j) / res};
      auto v = air_value(prob, sp.p, nu, rho, 1.0, DivergenceMode::av);
      if (v) EXPECT_LE(*v, sp.air_value + sp.gap + 1e-12);
    }
}

TEST(SolveMinimax, ValueIsMonotoneInEta) {
  for (const auto& prob : {toy_problem(256, 0.5), three_world_bandit(), two_world_bandit()}) {
    auto rho = fixtures::uniform(prob.num_infosets());
    for (auto mode : {DivergenceMode::av, DivergenceMode::sq}) {
      double prev = -std::numeric_limits<double>::infinity();
      for (double eta : {0.5, 1.0, 2.0}) {
        auto sp = solve_minimax(prob, rho, eta, mode);
        EXPECT_GE(sp.air_value, prev - 2e-4);
        prev = sp.air_value;
      }
    }
  }
}

TEST(SolveOptimistic, ToyNeverPlaysTheThirdArm) {
  auto prob = toy_problem(256, 0.5);
  for (int i = 0; i <= 20; ++i) {
    std::vector<double> rho{i / 20.0, 1.0 - i / 20.0};
    for (auto mode : {DivergenceMode::av, DivergenceMode::sq}) {
      auto sp = solve_optimistic(prob, rho, 1.0, mode);
      EXPECT_LE(sp.p[kThirdArm], 0.01) << "rho(phi_1) = " << rho[0];
    }
  }
}

TEST(SolveOptimistic, SingleInfosetIsGreedy) {
  auto prob = fixtures::bandit_problem({0.0, 1.0}, {{{0.8, 0.2}, {0.3, 0.7}, {0.5, 0.5}}});
  auto sp = solve_optimistic(prob, Vec{1.0}, 1.0, DivergenceMode::av);
  EXPECT_GE(sp.p[1], 0.99);
  EXPECT_NEAR(sp.air_value, 0.0, 1e-4);
}

TEST(SolveOptimistic, MatchesMatrixGameGrid) {
  auto prob = two_world_bandit();
  for (const auto& rho : {std::vector<double>{0.5, 0.5}, std::vector<double>{0.9, 0.1}}) {
    auto c = optimistic_matrix(prob, rho, 1.0);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
      double p = i / 1000.0;
      double worst = std::max(p * c[0][0] + (1 - p) * c[1][0], p * c[0][1] + (1 - p) * c[1][1]);
      best = std::min(best, worst);
    }
    auto sp = solve_optimistic(prob, rho, 1.0, DivergenceMode::av);
    EXPECT_NEAR(sp.air_value, best, 2e-3);
  }
}

TEST(EstimateDec, SingleInfosetIsZero) {
  auto prob = fixtures::bandit_problem({0.0, 0.5, 1.0}, {{{0.8, 0.0, 0.2}, {0.3, 0.0, 0.7}},
                                                         {{0.6, 0.4, 0.0}, {0.3, 0.0, 0.7}}});
  ASSERT_EQ(prob.num_infosets(), 1);
  EXPECT_NEAR(estimate_digdec(prob, 1.0, DivergenceMode::av).value, 0.0, 1e-4);
  EXPECT_NEAR(estimate_odec(prob, 1.0, DivergenceMode::av).value, 0.0, 1e-4);
}

TEST(EstimateDec, TooManyInfosetsRaiseCapExceeded) {
  auto prob = fixtures::bandit_problem({0.0, 1.0},
                                      {{{0.9, 0.1}}, {{0.8, 0.2}}, {{0.7, 0.3}}, {{0.6, 0.4}}, {{0.5, 0.5}}});
  ASSERT_EQ(prob.num_infosets(), 5);
  EXPECT_THROW(estimate_digdec(prob, 1.0, DivergenceMode::av), CapExceeded);
}

TEST(EstimateDec, ToyDigDecBelowODecPlusEta) {
  auto prob = toy_problem(256, 0.5);
  SaddleConfig cfg;
  auto dig = estimate_digdec(prob, 1.0, DivergenceMode::sq, cfg);
  auto od = estimate_odec(prob, 1.0, DivergenceMode::sq, cfg);
  EXPECT_LE(dig.value, od.value + 1.0 + 2 * cfg.gap_tolerance);
  EXPECT_EQ(dig.resolution, 20);
}

TEST(EstimateDec, TwoWorldNestedGrid) {
  auto prob = two_world_bandit();
  SaddleConfig cfg;
  cfg.grid_resolution = 10;
  const double eta = 1.0;
  double dig = -std::numeric_limits<double>::infinity(), od = dig;
  for (int i = 0; i <= cfg.grid_resolution; ++i) {
    std::vector<double> rho{double(i) / cfg.grid_resolution, 1.0 - double(i) / cfg.grid_resolution};
    dig = std::max(dig, brute_minmax_2x2(prob, rho, eta, DivergenceMode::sq, 400));
    auto c = optimistic_matrix(prob, rho, eta);
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= 400; ++j) {
      double p = j / 400.0;
      best = std::min(best, std::max(p * c[0][0] + (1 - p) * c[1][0], p * c[0][1] + (1 - p) * c[1][1]));
    }
    od = std::max(od, best);
  }
  EXPECT_NEAR(estimate_digdec(prob, eta, DivergenceMode::sq, cfg).value, dig, 5e-3);
  EXPECT_NEAR(estimate_odec(prob, eta, DivergenceMode::av, cfg).value, od, 5e-3);
}
