#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "digdec/agents.hpp"
#include "digdec/config.hpp"
#include "digdec/instances.hpp"
#include "digdec/saddle.hpp"

namespace digdec {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "DIGDEC_OUT_DIR";

inline std::string default_out_dir() {
  const char* v = std::getenv(kOutDirEnv);
  return v && *v ? std::string(v) : std::string("out");
}

inline const std::vector<std::string>& instance_names() {
  static const std::vector<std::string> names{"toy",   "two_world",      "three_world", "bernoulli",
                                              "chain", "chain_complete", "hybrid_chain", "custom"};
  return names;
}

namespace detail {

/// Places config rows at the (h, s, a) indices of the first `layers_covered` layers.
inline std::vector<std::vector<double>> spread_rows(const Layout& L, const ExperimentConfig::Rows& rows,
                                                    int layers_covered, const std::string& key) {
  int covered = 0;
  for (int h = 0; h < layers_covered; ++h) covered += L.layer_size(h) * L.num_actions();
  if (static_cast<int>(rows.size()) != covered)
    throw ConfigError(0, key, "expected " + std::to_string(covered) + " rows, got " + std::to_string(rows.size()));
  std::vector<std::vector<double>> out(L.num_sa());
  int k = 0;
  for (int h = 0; h < layers_covered; ++h)
    for (int s = 0; s < L.layer_size(h); ++s)
      for (int a = 0; a < L.num_actions(); ++a) out[L.sa_index(h, s, a)] = rows[k++];
  return out;
}

template <class Map>
std::vector<std::vector<std::vector<double>>> indexed_tables(const Layout& L, const Map& m, int layers_covered,
                                                             const std::string& key) {
  std::vector<std::vector<std::vector<double>>> out;
  int expect = 0;
  for (const auto& [i, rows] : m) {
    if (i != expect++) throw ConfigError(0, key, "indices must run 0, 1, 2, ... without gaps");
    out.push_back(spread_rows(L, rows, layers_covered, key + std::to_string(i)));
  }
  if (out.empty()) throw ConfigError(0, key, "at least one table is required");
  return out;
}

inline DecisionProblem custom_problem(const ExperimentConfig& c) {
  try {
    Layout L(c.layers, c.actions);
    const int H = static_cast<int>(c.layers.size());
    if (c.setting == "stochastic") {
      auto rewards = indexed_tables(L, c.model_reward, H, "model_<i>_reward ");
      std::vector<std::vector<std::vector<double>>> nexts(rewards.size(),
                                                          std::vector<std::vector<double>>(L.num_sa()));
      if (H > 1) nexts = indexed_tables(L, c.model_next, H - 1, "model_<i>_next ");
      if (nexts.size() != rewards.size()) throw ConfigError(0, "model_", "model counts differ");
      std::vector<TabularMdp> models;
      for (std::size_t i = 0; i < rewards.size(); ++i)
        models.emplace_back(L, c.reward_support, std::move(nexts[i]), std::move(rewards[i]));
      auto env = Environment::stochastic(std::move(models), all_deterministic_policies(L));
      auto part = build_partition_stochastic(env);
      if (c.partition == "complete") part = complete_partition(env, part);
      return DecisionProblem(std::move(env), std::move(part));
    }
    std::vector<std::vector<std::vector<double>>> transitions(
        std::max<std::size_t>(1, c.transition_next.size()), std::vector<std::vector<double>>(L.num_sa()));
    if (H > 1) transitions = indexed_tables(L, c.transition_next, H - 1, "transition_");
    auto rewards = indexed_tables(L, c.reward_rows, H, "reward_");
    if (c.features.empty()) throw ConfigError(0, "features", "required for a hybrid custom instance");
    const int d = static_cast<int>(c.features.front().size());
    FeatureMap F(L, d, spread_rows(L, c.features, H, "features"));
    auto env = Environment::hybrid(L, c.reward_support, transitions, rewards, F, all_deterministic_policies(L));
    auto part = build_partition_hybrid(env);
    return DecisionProblem(std::move(env), std::move(part));
  } catch (const InvalidArgument& e) {
    throw ConfigError(0, "instance", std::string("custom instance rejected: ") + e.what());
  }
}

}  // namespace detail

inline DecisionProblem make_problem(const ExperimentConfig& c) {
  const std::string& n = c.instance;
  if (n == "toy") return toy_problem(c.T, c.epsilon_ratio);
  if (n == "two_world") return two_world_bandit();
  if (n == "three_world") return three_world_bandit();
  if (n == "bernoulli") {
    auto env = make_bernoulli_bandits(c.means);
    auto part = build_partition_stochastic(env);
    return DecisionProblem(std::move(env), std::move(part));
  }
  if (n == "chain") return stochastic_chain_problem();
  if (n == "chain_complete") return stochastic_chain_complete_problem();
  if (n == "hybrid_chain") return hybrid_chain_problem();
  if (n == "custom") return detail::custom_problem(c);
  throw ConfigError(0, "instance", "unknown instance '" + n + "'");
}

inline World make_world(const ExperimentConfig& c, const DecisionProblem& prob) {
  const auto& env = prob.env();
  if (env.setting() == Setting::stochastic) {
    if (c.true_model < 0 || c.true_model >= env.num_models())
      throw ConfigError(0, "true_model", "out of range");
    return World::stochastic(c.true_model);
  }
  if (c.true_model < 0 || c.true_model >= env.num_transitions())
    throw ConfigError(0, "true_model", "out of range");
  if (c.adversary == "alternating") return World::hybrid(env, c.true_model, alternating_rewards(env.num_rewards()));
  const std::string prefix = "constant:";
  if (c.adversary.rfind(prefix, 0) == 0) {
    int j = detail::parse_int<int>(c.adversary.substr(prefix.size()), 0, "adversary");
    if (j < 0 || j >= env.num_rewards()) throw ConfigError(0, "adversary", "reward index out of range");
    return World::hybrid(env, c.true_model, [j](int, const std::vector<RoundLog>&) { return j; });
  }
  throw ConfigError(0, "adversary", "expected alternating or constant:<j>, got '" + c.adversary + "'");
}

inline AgentConfig make_agent_config(const std::string& name, const ExperimentConfig& c) {
  AgentConfig a;
  if (name == "digdec") a = AgentConfig::dig_dec(c.mode, c.eta);
  else if (name == "optimistic") a = AgentConfig::optimistic(c.mode, c.eta);
  else if (name == "phi_air") a = AgentConfig::phi_air(c.eta);
  else throw ConfigError(0, "agents", "unknown agent '" + name + "'");
  a.name = name;
  a.saddle.gap_tolerance = c.gap_tolerance;
  a.delta = c.delta;
  if (a.engine == EngineKind::epoch) a.batch = c.batch;
  a.epoch_posterior_terms = c.epoch_posterior_terms;
  return a;
}

/// One CSV row.
struct RegretRecord {
  std::string experiment, agent;
  std::uint64_t seed = 0;
  int round = 0;
  double pseudo_regret_cum = 0.0;
  double realized_regret_cum = 0.0;
  double est_kl_cum = 0.0;  ///< NaN when the oracle is off
  double est_div_cum = 0.0;
  double gap = 0.0;
};

inline const char* kRunHeader =
    "experiment,agent,seed,round,pseudo_regret_cum,realized_regret_cum,est_kl_cum,est_div_cum,gap";

/// %.12g; NaN is written as "nan".
inline std::string fmt12(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

/// The value a reader of the CSV sees.
inline double round12(double x) { return std::isnan(x) ? x : std::strtod(fmt12(x).c_str(), nullptr); }

/// Writes to a temporary sibling, then renames over `path`.
inline void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<RegretRecord> to_records(const std::string& experiment, const std::string& agent,
                                            std::uint64_t seed, const RunTrace& tr) {
  std::vector<RegretRecord> rows;
  rows.reserve(tr.logs.size());
  double pr = 0.0, rr = 0.0, kl = 0.0, dv = 0.0;
  const bool oracle = !tr.est.empty();
  for (std::size_t t = 0; t < tr.logs.size(); ++t) {
    pr += tr.pseudo_regret[t];
    rr += tr.realized_regret[t];
    if (oracle) {
      kl += tr.est[t].kl;
      dv += tr.est[t].div;
    }
    RegretRecord r;
    r.experiment = experiment;
    r.agent = agent;
    r.seed = seed;
    r.round = tr.logs[t].round;
    r.pseudo_regret_cum = round12(pr);
    r.realized_regret_cum = round12(rr);
    r.est_kl_cum = oracle ? round12(kl) : std::numeric_limits<double>::quiet_NaN();
    r.est_div_cum = oracle ? round12(dv) : std::numeric_limits<double>::quiet_NaN();
    r.gap = round12(tr.logs[t].gap);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string run_csv(const std::vector<RegretRecord>& rows) {
  std::ostringstream out;
  out << kRunHeader << '\n';
  for (const auto& r : rows)
    out << r.experiment << ',' << r.agent << ',' << r.seed << ',' << r.round << ',' << fmt12(r.pseudo_regret_cum)
        << ',' << fmt12(r.realized_regret_cum) << ',' << fmt12(r.est_kl_cum) << ',' << fmt12(r.est_div_cum) << ','
        << fmt12(r.gap) << '\n';
  return out.str();
}

inline const char* kAggregateHeader =
    "experiment,agent,round,seeds,"
    "pseudo_regret_mean,pseudo_regret_min,pseudo_regret_max,"
    "realized_regret_mean,realized_regret_min,realized_regret_max,"
    "est_kl_mean,est_kl_min,est_kl_max,"
    "est_div_mean,est_div_min,est_div_max,"
    "gap_mean,gap_min,gap_max";

/// Mean and min/max envelope across seeds, per agent and round. Every run
/// of an agent must have the same length.
inline std::string aggregate_csv(const std::vector<std::vector<RegretRecord>>& runs) {
  std::map<std::string, std::vector<const std::vector<RegretRecord>*>> by_agent;
  std::vector<std::string> order;
  for (const auto& run : runs) {
    if (run.empty()) continue;
    auto& v = by_agent[run.front().agent];
    if (v.empty()) order.push_back(run.front().agent);
    v.push_back(&run);
  }
  std::ostringstream out;
  out << kAggregateHeader << '\n';
  using Field = double RegretRecord::*;
  const Field fields[] = {&RegretRecord::pseudo_regret_cum, &RegretRecord::realized_regret_cum,
                          &RegretRecord::est_kl_cum, &RegretRecord::est_div_cum, &RegretRecord::gap};
  for (const auto& agent : order) {
    const auto& group = by_agent[agent];
    const std::size_t T = group.front()->size();
    for (const auto* g : group)
      if (g->size() != T) throw InvalidArgument("runs of agent " + agent + " differ in length");
    for (std::size_t t = 0; t < T; ++t) {
      const auto& head = (*group.front())[t];
      out << head.experiment << ',' << agent << ',' << head.round << ',' << group.size();
      for (Field f : fields) {
        double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto* g : group) {
          double x = (*g)[t].*f;
          sum += x;
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
        if (std::isnan(sum)) lo = hi = sum;
        out << ',' << fmt12(sum / group.size()) << ',' << fmt12(lo) << ',' << fmt12(hi);
      }
      out << '\n';
    }
  }
  return out.str();
}

inline std::string run_file_name(const std::string& experiment, const std::string& agent, std::uint64_t seed) {
  return experiment + "_" + agent + "_seed" + std::to_string(seed) + ".csv";
}

struct RunOutput {
  std::vector<std::string> files;  ///< per-run files, then the aggregate
  std::vector<std::vector<RegretRecord>> runs;
  std::vector<RunTrace> traces;
};

/// Every (agent, seed) run of the experiment; files go to `out_dir`.
inline RunOutput cmd_run(const ExperimentConfig& c, const std::string& out_dir, std::ostream* log = nullptr) {
  c.validate();
  const DecisionProblem prob = make_problem(c);
  const World world = make_world(c, prob);
  RunOutput res;
  for (const auto& name : c.agents) {
    const AgentConfig acfg = make_agent_config(name, c);
    for (std::uint64_t seed : c.seeds) {
      Agent agent(prob, acfg, c.T);
      Rng rng(seed);
      RunTrace tr = run_episode_sequence(agent, prob, world, c.T, rng, c.oracle);
      auto rows = to_records(c.experiment, name, seed, tr);
      auto path = std::filesystem::path(out_dir) / run_file_name(c.experiment, name, seed);
      write_atomically(path, run_csv(rows));
      if (log)
        *log << name << " seed " << seed << ": pseudo-regret " << fmt12(rows.back().pseudo_regret_cum) << " -> "
             << path.string() << '\n';
      res.files.push_back(path.string());
      res.runs.push_back(std::move(rows));
      res.traces.push_back(std::move(tr));
    }
  }
  auto agg = std::filesystem::path(out_dir) / (c.experiment + "_aggregate.csv");
  write_atomically(agg, aggregate_csv(res.runs));
  res.files.push_back(agg.string());
  return res;
}

/// One row of the dig-dec / o-dec table.
struct DecRow {
  double eta = 0.0;
  double digdec = 0.0;
  double odec = 0.0;
  double grid_slack = 0.0;  ///< rho-grid discretization allowance on o-dec
  double gap_slack = 0.0;   ///< saddle gaps of both estimates
  bool holds = false;       ///< digdec <= odec + eta + 2 (grid + gap slack)
  std::optional<double> digdec_fine;  ///< same estimate on the doubled grid
};

/// (1 + 1/eta)(|Phi| - 1) / resolution.
inline double odec_grid_slack(int num_infosets, double eta, int resolution) {
  return (1.0 + 1.0 / eta) * (num_infosets - 1) / static_cast<double>(resolution);
}

/**
 * Estimates dig-dec and o-dec for each eta. With `nested` and |Phi| <= 3 the
 * dig-dec estimate is repeated on the doubled grid, which contains the coarse one.
 */
inline std::vector<DecRow> cmd_digdec(const DecisionProblem& prob, const std::vector<double>& etas,
                                      DivergenceMode mode, const SaddleConfig& cfg = {}, bool nested = false) {
  if (prob.num_infosets() > 4)
    throw CapExceeded("dig-dec estimation needs at most 4 infosets, got " + std::to_string(prob.num_infosets()));
  std::vector<DecRow> rows;
  for (double eta : etas) {
    DecRow r;
    r.eta = eta;
    auto d = estimate_digdec(prob, eta, mode, cfg);
    auto o = estimate_odec(prob, eta, mode, cfg);
    r.digdec = d.value;
    r.odec = o.value;
    r.grid_slack = odec_grid_slack(prob.num_infosets(), eta, cfg.grid_resolution);
    r.gap_slack = d.max_gap + o.max_gap;
    r.holds = r.digdec <= r.odec + eta + 2.0 * (r.grid_slack + r.gap_slack);
    if (nested && prob.num_infosets() <= 3) {
      SaddleConfig fine = cfg;
      fine.grid_resolution = 2 * cfg.grid_resolution;
      r.digdec_fine = estimate_digdec(prob, eta, mode, fine).value;
    }
    rows.push_back(r);
  }
  return rows;
}

inline const char* kDecHeader = "instance,mode,eta,digdec,odec,grid_slack,gap_slack,holds,digdec_fine";

inline std::string dec_csv(const std::string& instance, DivergenceMode mode, const std::vector<DecRow>& rows) {
  std::ostringstream out;
  out << kDecHeader << '\n';
  for (const auto& r : rows)
    out << instance << ',' << to_string(mode) << ',' << fmt12(r.eta) << ',' << fmt12(r.digdec) << ','
        << fmt12(r.odec) << ',' << fmt12(r.grid_slack) << ',' << fmt12(r.gap_slack) << ','
        << (r.holds ? "yes" : "no") << ','
        << (r.digdec_fine ? fmt12(*r.digdec_fine) : std::string("nan")) << '\n';
  return out.str();
}

}  // namespace digdec
