#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "digdec/agents.hpp"
#include "digdec/bench.hpp"
#include "digdec/estimation.hpp"
#include "digdec/instances.hpp"
#include "digdec/saddle.hpp"

namespace digdec::acceptance {

struct Result {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Options {
  double dav_scale = 1.0;   ///< multiplies d_av in criterion 5 (mutation hook)
  std::string scratch_dir;  ///< for the determinism check; empty uses a temp dir
  std::ostream* progress = nullptr;
};

/// Completed run kept for the structural checks of criterion 10.
struct BankedRun {
  std::string label;
  bool stochastic = true;
  bool digdec_rule = true;
  double eta = 1.0;
  double gap_tolerance = 1e-4;
  RunTrace trace;
};

class Suite {
 public:
  explicit Suite(Options opt = {}) : opt_(std::move(opt)) {}

  Result toy_separation();
  Result saddle_certificate();
  Result closed_form_updates();
  Result dec_comparison();
  Result divergence_ordering();
  Result sublinear_stochastic();
  Result sublinear_hybrid();
  Result est_diagnostics();
  Result epoch_unbiasedness();
  Result determinism_and_invariants();

  /// All criteria in order; `sink` sees each result as it completes.
  std::vector<Result> run_all(const std::function<void(const Result&)>& sink = {}) {
    std::vector<Result> out;
    using Fn = Result (Suite::*)();
    const Fn fns[] = {&Suite::toy_separation,      &Suite::saddle_certificate,   &Suite::closed_form_updates,
                      &Suite::dec_comparison,      &Suite::divergence_ordering,  &Suite::sublinear_stochastic,
                      &Suite::sublinear_hybrid,    &Suite::est_diagnostics,      &Suite::epoch_unbiasedness,
                      &Suite::determinism_and_invariants};
    for (Fn f : fns) {
      Result r;
      try {
        r = (this->*f)();
      } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
      }
      out.push_back(r);
      if (sink) sink(r);
    }
    return out;
  }

  const std::vector<BankedRun>& bank() const { return bank_; }

 private:
  void note(const std::string& s) {
    if (opt_.progress) *opt_.progress << "  .. " << s << std::endl;
  }

  RunTrace run(const std::string& label, const DecisionProblem& prob, const World& world, AgentConfig cfg, int T,
               std::uint64_t seed, bool keep = true) {
    Agent agent(prob, cfg, T);
    Rng rng(seed);
    RunTrace tr = run_episode_sequence(agent, prob, world, T, rng, true);
    if (keep)
      bank_.push_back({label, !world.is_hybrid(), cfg.rule == DecisionRule::digdec, cfg.eta,
                       cfg.saddle.gap_tolerance, tr});
    return tr;
  }

  static double cumulative(const std::vector<double>& v, std::size_t upto) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(upto, v.size()); ++i) s += v[i];
    return s;
  }

  static double est_total(const RunTrace& tr, std::size_t upto) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(upto, tr.est.size()); ++i) s += tr.est[i].kl + tr.est[i].div;
    return s;
  }

  Options opt_;
  std::vector<BankedRun> bank_;
  // Shared between criteria 6 and 8.
  std::map<std::pair<std::string, int>, std::vector<RunTrace>> chain_runs_;
  const std::vector<RunTrace>& chain_runs(DivergenceMode mode, int T, int seeds);
};

inline std::string fmt(double x) { return fmt12(x); }

// 1 -------------------------------------------------------------------------

inline Result Suite::toy_separation() {
  Result r{1, "toy_separation", true, ""};
  std::ostringstream d;
  const double eta = 1.0;
  const int seeds = 20;

  // Dig-DEC, both possible true models.
  {
    const int T = 1024;
    auto prob = toy_problem(T, 0.5);
    auto cfg = AgentConfig::dig_dec(DivergenceMode::sq, eta);
    auto first = solve_minimax(prob, std::vector<double>{0.5, 0.5}, eta, DivergenceMode::sq, cfg.saddle);
    bool ok_p1 = first.p[2] >= 0.99;
    double worst = 0.0;
    for (int m = 0; m < 2; ++m) {
      double mean = 0.0;
      for (int s = 0; s < seeds; ++s) {
        auto tr = run("toy_digdec", prob, World::stochastic(m), cfg, T, 100 + s);
        ok_p1 = ok_p1 && tr.logs.front().p[2] >= 0.99;
        mean += cumulative(tr.pseudo_regret, T) / seeds;
      }
      worst = std::max(worst, mean);
    }
    d << "digdec p1(a3)=" << fmt(first.p[2]) << " max_M mean Reg=" << fmt(worst);
    r.pass = r.pass && ok_p1 && worst <= 1.0;
  }
  note("toy dig-dec done");

  // Optimistic baseline, same engine.
  double reg[2] = {0.0, 0.0};
  double max_p3 = 0.0;
  const int Ts[2] = {1024, 4096};
  for (int i = 0; i < 2; ++i) {
    auto prob = toy_problem(Ts[i], 0.5);
    auto cfg = AgentConfig::optimistic(DivergenceMode::sq, eta);
    for (int s = 0; s < seeds; ++s) {
      auto tr = run("toy_optimistic", prob, World::stochastic(0), cfg, Ts[i], 200 + s);
      for (const auto& l : tr.logs) max_p3 = std::max(max_p3, l.p[2]);
      reg[i] += cumulative(tr.pseudo_regret, Ts[i]) / seeds;
    }
    note("toy optimistic T=" + std::to_string(Ts[i]) + " done");
  }
  const double ratio = reg[1] / reg[0];
  d << "; optimistic max p(a3)=" << fmt(max_p3) << " Reg1024=" << fmt(reg[0]) << " Reg4096=" << fmt(reg[1])
    << " ratio=" << fmt(ratio);
  r.pass = r.pass && max_p3 <= 0.01 && reg[0] >= std::sqrt(1024.0) / 64.0 && ratio >= 1.5 && ratio <= 2.8;
  r.detail = d.str();
  return r;
}

// 2 -------------------------------------------------------------------------

namespace detail {

struct NamedProblem {
  std::string name;
  DecisionProblem prob;
};

inline std::vector<NamedProblem> small_instances() {
  std::vector<NamedProblem> v;
  v.push_back({"toy", toy_problem(1024, 0.5)});
  v.push_back({"two_world", two_world_bandit()});
  v.push_back({"three_world", three_world_bandit()});
  v.push_back({"chain", stochastic_chain_problem()});
  v.push_back({"chain_complete", stochastic_chain_complete_problem()});
  return v;
}

inline std::vector<std::vector<double>> probe_rhos(int n, Rng& rng, int random_count) {
  std::vector<std::vector<double>> out;
  out.push_back(std::vector<double>(n, 1.0 / n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(n, 0.02 / (n - 1 > 0 ? n - 1 : 1));
    v[i] = n > 1 ? 0.98 : 1.0;
    out.push_back(normalized(v));
  }
  for (int k = 0; k < random_count; ++k) {
    std::vector<double> v(n);
    for (double& x : v) x = -std::log(1.0 - rng.uniform());
    out.push_back(normalized(v));
  }
  return out;
}

}  // namespace detail

inline Result Suite::saddle_certificate() {
  Result r{2, "saddle_certificate", true, ""};
  std::ostringstream d;
  Rng rng(2024);
  double worst_gap = 0.0;
  int solves = 0;
  for (auto& [name, prob] : detail::small_instances()) {
    if (prob.num_world_points() > 12) continue;
    for (auto mode : {DivergenceMode::none, DivergenceMode::av, DivergenceMode::sq}) {
      if (mode == DivergenceMode::sq && !prob.is_complete()) continue;
      for (double eta : {0.5, 1.0, 2.0})
        for (const auto& rho : detail::probe_rhos(prob.num_infosets(), rng, 3)) {
          auto sp = solve_minimax(prob, rho, eta, mode);
          worst_gap = std::max(worst_gap, sp.gap);
          ++solves;
        }
    }
  }
  r.pass = worst_gap <= 1e-4;
  d << solves << " solves, max gap=" << fmt(worst_gap);

  // Brute force on the 2x2 instance: min over a p-grid of max over a nu-grid.
  auto prob = two_world_bandit();
  const int res = 1000;
  double worst_diff = 0.0;
  for (const auto& rho : detail::probe_rhos(2, rng, 2))
    for (auto mode : {DivergenceMode::none, DivergenceMode::av, DivergenceMode::sq}) {
      const double eta = 1.0;
      AirObjective obj(prob, rho, eta, mode);
      std::vector<double> a0(res + 1), a1(res + 1);
      Eigen::VectorXd nu(2);
      for (int i = 0; i <= res; ++i) {
        nu << static_cast<double>(i) / res, 1.0 - static_cast<double>(i) / res;
        a0[i] = obj.value(0, nu);
        a1[i] = obj.value(1, nu);
      }
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j <= res; ++j) {
        double p = static_cast<double>(j) / res, worst = -std::numeric_limits<double>::infinity();
        for (int i = 0; i <= res; ++i) worst = std::max(worst, p * a0[i] + (1.0 - p) * a1[i]);
        best = std::min(best, worst);
      }
      auto sp = solve_minimax(prob, rho, eta, mode);
      worst_diff = std::max(worst_diff, std::abs(best - sp.air_value));
    }
  r.pass = r.pass && worst_diff <= 2e-3;
  d << "; 2x2 grid brute-force max diff=" << fmt(worst_diff);
  r.detail = d.str();
  return r;
}

// 3 -------------------------------------------------------------------------

namespace detail {

/**
 * Minimizes <rho,c> + sum_t KL(rho,q_t) + w KL(rho,anchor) by equality-constrained
 * Newton on the simplex, with a fraction-to-boundary cap and Armijo backtracking.
 * Inputs must be strictly positive.
 */
inline Eigen::VectorXd newton_simplex_min(const Eigen::VectorXd& anchor, double w,
                                          const std::vector<Eigen::VectorXd>& qs, const Eigen::VectorXd& c) {
  const int n = static_cast<int>(anchor.size());
  auto objective = [&](const Eigen::VectorXd& rho) {
    double f = rho.dot(c);
    for (int i = 0; i < n; ++i) {
      double lr = std::log(rho(i));
      f += w * rho(i) * (lr - std::log(anchor(i)));
      for (const auto& q : qs) f += rho(i) * (lr - std::log(q(i)));
    }
    return f;
  };
  const double tq = static_cast<double>(qs.size()) + w;
  Eigen::VectorXd rho = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) {
      double v = c(i) + tq * (std::log(rho(i)) + 1.0) - w * std::log(anchor(i));
      for (const auto& q : qs) v -= std::log(q(i));
      g(i) = v;
    }
    // Hessian tq/rho_i on the diagonal; the KKT multiplier is the rho-weighted mean of g.
    const double gbar = rho.dot(g);
    Eigen::VectorXd d = -(rho.array() * (g.array() - gbar) / tq).matrix();
    const double decrement = -g.dot(d);
    if (decrement < 1e-28) break;
    double a = 1.0;
    for (int i = 0; i < n; ++i)
      if (d(i) < 0.0) a = std::min(a, -0.99 * rho(i) / d(i));
    const double f0 = objective(rho);
    while (a > 1e-16 && objective(rho + a * d) > f0 - 1e-4 * a * decrement) a *= 0.5;
    rho += a * d;
    rho /= rho.sum();
  }
  return rho;
}

}  // namespace detail

inline Result Suite::closed_form_updates() {
  Result r{3, "closed_form_updates", true, ""};
  Rng rng(33);
  auto positive = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = 0.05 + rng.uniform();
    return Eigen::VectorXd(v / v.sum());
  };
  double worst[2] = {0.0, 0.0};
  for (int alg = 0; alg < 2; ++alg)
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform() * 5);
      // Epoch form: tau posteriors, anchor weight 1/gamma with gamma = 1/(2 beta).
      // Bi-level form: one posterior, anchor weight 4 iota.
      const int tau = alg == 0 ? 2 * (1 + static_cast<int>(rng.uniform() * 4)) : 1;
      const double w = alg == 0 ? 2.0 * (1.0 + 20.0 * rng.uniform()) : 4.0 * (1.0 + 100.0 * rng.uniform());
      Eigen::VectorXd anchor = positive(n), c(n);
      std::vector<Eigen::VectorXd> qs;
      for (int t = 0; t < tau; ++t) qs.push_back(positive(n));
      for (int i = 0; i < n; ++i) c(i) = 4.0 * (rng.uniform() - 0.5);
      std::vector<std::vector<double>> qstd;
      for (const auto& q : qs) qstd.push_back(digdec::detail::to_std(q));
      auto closed = geometric_mixture(digdec::detail::to_std(anchor), w, qstd, digdec::detail::to_std(c));
      auto numeric = detail::newton_simplex_min(anchor, w, qs, c);
      for (int i = 0; i < n; ++i) worst[alg] = std::max(worst[alg], std::abs(closed[i] - numeric(i)));
    }
  r.pass = worst[0] <= 1e-7 && worst[1] <= 1e-7;
  r.detail = "epoch form max diff=" + fmt(worst[0]) + ", bi-level form max diff=" + fmt(worst[1]);
  return r;
}

// 4 -------------------------------------------------------------------------

inline Result Suite::dec_comparison() {
  Result r{4, "dec_comparison", true, ""};
  std::ostringstream d;
  std::vector<detail::NamedProblem> inst;
  inst.push_back({"toy", toy_problem(1024, 0.5)});
  inst.push_back({"two_world", two_world_bandit()});
  inst.push_back({"three_world", three_world_bandit()});
  double margin = std::numeric_limits<double>::infinity();
  int rows = 0;
  for (auto& [name, prob] : inst)
    for (auto mode : {DivergenceMode::av, DivergenceMode::sq}) {
      for (const auto& row : cmd_digdec(prob, {0.5, 1.0, 2.0}, mode)) {
        ++rows;
        r.pass = r.pass && row.holds;
        margin = std::min(margin, row.odec + row.eta + 2.0 * (row.grid_slack + row.gap_slack) - row.digdec);
        if (!row.holds)
          d << name << "/" << to_string(mode) << " eta=" << fmt(row.eta) << " digdec=" << fmt(row.digdec)
            << " odec=" << fmt(row.odec) << "; ";
      }
      note("dec table " + name + "/" + to_string(mode) + " done");
    }
  d << rows << " rows, min margin=" << fmt(margin);
  r.detail = d.str();
  return r;
}

// 5 -------------------------------------------------------------------------

inline Result Suite::divergence_ordering() {
  Result r{5, "divergence_ordering", true, ""};
  std::vector<detail::NamedProblem> inst;
  inst.push_back({"chain_complete", stochastic_chain_complete_problem()});
  inst.push_back({"three_world", three_world_bandit()});
  double worst_order = -std::numeric_limits<double>::infinity(), worst_dual = 0.0;
  int cells = 0;
  for (auto& [name, prob] : inst) {
    if (!prob.is_complete()) {
      r.pass = false;
      r.detail += name + " is not Bellman complete; ";
      continue;
    }
    const auto& env = prob.env();
    const auto& part = prob.partition();
    for (int pi = 0; pi < env.num_policies(); ++pi)
      for (int phi = 0; phi < part.size(); ++phi)
        for (int m = 0; m < env.num_models(); ++m) {
          double av = opt_.dav_scale * d_av(env, part, phi, m, pi, prob.spec());
          double sq = d_sq(env, part, phi, m, pi, prob.spec());
          double gap_form = d_sq_gap_form(env, part, phi, m, pi, prob.spec());
          worst_order = std::max(worst_order, av - sq);
          worst_dual = std::max(worst_dual, std::abs(sq - gap_form));
          ++cells;
        }
  }
  r.pass = r.pass && worst_order <= 1e-12 && worst_dual <= 1e-9;
  r.detail += std::to_string(cells) + " cells, max(d_av - d_sq)=" + fmt(worst_order) +
              ", max dual-form diff=" + fmt(worst_dual);
  return r;
}

// 6 -------------------------------------------------------------------------

inline const std::vector<RunTrace>& Suite::chain_runs(DivergenceMode mode, int T, int seeds) {
  auto key = std::make_pair(std::string(to_string(mode)), T);
  auto it = chain_runs_.find(key);
  if (it != chain_runs_.end()) return it->second;
  static const DecisionProblem prob = stochastic_chain_complete_problem();
  auto cfg = AgentConfig::dig_dec(mode, 1.0);
  std::vector<RunTrace> runs;
  for (int s = 0; s < seeds; ++s)
    runs.push_back(run("chain_" + std::string(to_string(mode)), prob, World::stochastic(0), cfg, T, 600 + s));
  note("chain " + std::string(to_string(mode)) + " T=" + std::to_string(T) + " done");
  return chain_runs_[key] = std::move(runs);
}

inline Result Suite::sublinear_stochastic() {
  Result r{6, "sublinear_stochastic", true, ""};
  std::ostringstream d;
  const int seeds = 10;
  for (auto mode : {DivergenceMode::av, DivergenceMode::sq}) {
    d << to_string(mode) << " Reg/T:";
    double prev = std::numeric_limits<double>::infinity();
    for (int T : {256, 1024, 4096}) {
      double mean = 0.0;
      for (const auto& tr : chain_runs(mode, T, seeds)) mean += cumulative(tr.pseudo_regret, T) / seeds;
      double avg = mean / T;
      d << ' ' << fmt(avg);
      r.pass = r.pass && avg < prev;
      prev = avg;
    }
    d << "; ";
  }
  r.detail = d.str();
  return r;
}

// 7 -------------------------------------------------------------------------

inline Result Suite::sublinear_hybrid() {
  Result r{7, "sublinear_hybrid", true, ""};
  std::ostringstream d;
  const int seeds = 3;
  const DecisionProblem prob = hybrid_chain_problem();
  const World world = World::hybrid(prob.env(), 0, alternating_rewards(prob.env().num_rewards()));
  auto cfg = AgentConfig::dig_dec(DivergenceMode::av, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  d << "av Reg/T:";
  for (int T : {256, 1024, 4096}) {
    double mean = 0.0;
    for (int s = 0; s < seeds; ++s) {
      auto tr = run("hybrid_av", prob, world, cfg, T, 700 + s);
      mean += cumulative(tr.pseudo_regret, T) / seeds;
    }
    double avg = mean / T;
    d << ' ' << fmt(avg);
    r.pass = r.pass && avg < prev;
    prev = avg;
    note("hybrid T=" + std::to_string(T) + " done");
  }
  r.detail = d.str();
  return r;
}

// 8 -------------------------------------------------------------------------

inline Result Suite::est_diagnostics() {
  Result r{8, "est_diagnostics", true, ""};
  std::ostringstream d;
  const int seeds = 10;
  double e1024 = 0.0, e4096 = 0.0;
  for (const auto& tr : chain_runs(DivergenceMode::sq, 4096, seeds)) {
    e1024 += est_total(tr, 1024) / seeds;
    e4096 += est_total(tr, 4096) / seeds;
  }
  bool plateau = e4096 <= 1.5 * e1024;
  d << "bi-level Est(1024)=" << fmt(e1024) << " Est(4096)=" << fmt(e4096) << " ratio=" << fmt(e4096 / e1024);

  double scaled[2];
  const int Ts[2] = {512, 4096};
  for (int i = 0; i < 2; ++i) {
    double e = 0.0;
    for (const auto& tr : chain_runs(DivergenceMode::av, Ts[i], seeds)) e += est_total(tr, Ts[i]) / seeds;
    scaled[i] = e / std::cbrt(static_cast<double>(Ts[i]));
  }
  double f = std::max(scaled[0], scaled[1]) / std::min(scaled[0], scaled[1]);
  bool within = scaled[0] > 0.0 && scaled[1] > 0.0 && f <= 3.0;
  d << "; epoch Est/T^(1/3) at 512=" << fmt(scaled[0]) << " at 4096=" << fmt(scaled[1]) << " factor=" << fmt(f);
  r.pass = plateau && within;
  r.detail = d.str();
  return r;
}

// 9 -------------------------------------------------------------------------

inline Result Suite::epoch_unbiasedness() {
  Result r{9, "epoch_unbiasedness", true, ""};
  const DecisionProblem prob = stochastic_chain_problem();
  const auto& env = prob.env();
  const int model = 1, pi = 5, tau = 2, epochs = 100000;
  const int n = prob.num_infosets();
  const int H = env.layout().horizon();
  const auto& spec = prob.spec();

  // Enumerated target: (tau/(B^2 H)) sum_{j,h} (E l_h,j)^2.
  std::vector<double> target(n, 0.0);
  const auto& space = env.observations(pi);
  for (int phi = 0; phi < n; ++phi) {
    const Infoset& f = prob.partition().infoset(phi);
    const int N = f.num_components();
    std::vector<double> mean(N * H, 0.0);
    for (std::size_t o = 0; o < space.size(); ++o) {
      double p = space.likelihood(model, static_cast<int>(o));
      const auto& t = space.at(o);
      for (int h = 0; h < H; ++h) {
        int sa = env.layout().sa_index(h, t.states[h], t.actions[h]);
        for (int j = 0; j < N; ++j) {
          double next = h + 1 < H ? f.state_values[j][env.layout().state_index(h + 1, t.states[h + 1])] : 0.0;
          double y = env.reward_values()[t.rewards[h]];
          mean[j * H + h] += p * (f.tables[j][sa] - y - next);
        }
      }
    }
    for (double m : mean) target[phi] += m * m;
    target[phi] *= tau / (spec.B_av * spec.B_av * H);
  }

  Rng rng(99);
  std::vector<double> sum(n, 0.0), sum2(n, 0.0);
  std::vector<Trajectory> batch(tau);
  for (int k = 0; k < epochs; ++k) {
    for (int t = 0; t < tau; ++t) batch[t] = space.at(env.sample_observation(model, pi, rng));
    auto L = epoch_loss(prob, batch);
    for (int phi = 0; phi < n; ++phi) {
      sum[phi] += L[phi];
      sum2[phi] += L[phi] * L[phi];
    }
  }
  std::ostringstream d;
  double worst = 0.0;
  for (int phi = 0; phi < n; ++phi) {
    double mean = sum[phi] / epochs;
    double var = std::max(sum2[phi] / epochs - mean * mean, 0.0);
    double se = std::sqrt(var / epochs);
    double z = se > 0.0 ? std::abs(mean - target[phi]) / se : (mean == target[phi] ? 0.0 : INFINITY);
    worst = std::max(worst, z);
    r.pass = r.pass && z <= 4.0;
  }
  d << n << " infosets, " << epochs << " epochs, max |mean-target|/se=" << fmt(worst);
  r.detail = d.str();
  return r;
}

// 10 ------------------------------------------------------------------------

inline Result Suite::determinism_and_invariants() {
  Result r{10, "determinism_and_invariants", true, ""};
  std::ostringstream d;

  // Byte-identical CSVs from two runs of the same config.
  namespace fs = std::filesystem;
  fs::path root =
      opt_.scratch_dir.empty() ? fs::temp_directory_path() / "digdec_acceptance" : fs::path(opt_.scratch_dir);
  fs::remove_all(root);
  auto cfg = parse_config_text(
      "experiment = determinism\ninstance = toy\nT = 200\nseeds = 1-3\nagents = digdec, optimistic\nmode = sq\n");
  auto a = cmd_run(cfg, (root / "a").string());
  auto b = cmd_run(cfg, (root / "b").string());
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool identical = a.files.size() == b.files.size();
  for (std::size_t i = 0; identical && i < a.files.size(); ++i)
    identical = slurp(a.files[i]) == slurp(b.files[i]) && !slurp(a.files[i]).empty();
  fs::remove_all(root);
  d << "csv identical=" << (identical ? "yes" : "no");

  // Normalization of every distribution-valued quantity.
  double worst_norm = 0.0;
  bool nonneg = true;
  auto check = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
      nonneg = nonneg && x >= 0.0;
      s += x;
    }
    worst_norm = std::max(worst_norm, std::abs(s - 1.0));
  };
  int rounds = 0;
  for (const auto& run : bank_)
    for (const auto& l : run.trace.logs) {
      check(l.rho);
      check(l.p);
      check(l.nu);
      ++rounds;
    }
  d << "; " << rounds << " logged rounds, max |sum-1|=" << fmt(worst_norm);

  // Regret ledger on stochastic Dig-DEC runs.
  int ledger_runs = 0, violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& run : bank_) {
    if (!run.stochastic || !run.digdec_rule) continue;
    const auto& tr = run.trace;
    const int T = static_cast<int>(tr.logs.size());
    double lhs = cumulative(tr.pseudo_regret, T), air = 0.0;
    for (const auto& l : tr.logs) air += l.air_value;
    double rhs = air + est_total(tr, T) / run.eta + 3.0 * T * run.gap_tolerance;
    min_slack = std::min(min_slack, rhs - lhs);
    ++ledger_runs;
    if (!(lhs <= rhs)) ++violations;
  }
  d << "; ledger runs=" << ledger_runs << " violations=" << violations << " min slack=" << fmt(min_slack);
  r.pass = identical && nonneg && worst_norm <= 1e-9 && ledger_runs > 0 && violations == 0;
  r.detail = d.str();
  return r;
}

/// "criterion <id> <PASS|FAIL> <name>: <detail>"
inline std::string format_line(const Result& r) {
  return "criterion " + std::to_string(r.id) + " " + (r.pass ? "PASS" : "FAIL") + " " + r.name + ": " + r.detail;
}

}  // namespace digdec::acceptance
