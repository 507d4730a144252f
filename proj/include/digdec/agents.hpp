#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "digdec/distribution.hpp"
#include "digdec/errors.hpp"
#include "digdec/estimation.hpp"
#include "digdec/problem.hpp"
#include "digdec/random.hpp"
#include "digdec/saddle.hpp"

namespace digdec {

enum class DecisionRule { digdec, optimistic };

struct AgentConfig {
  std::string name = "digdec";
  DecisionRule rule = DecisionRule::digdec;
  double eta = 1.0;
  DivergenceMode mode = DivergenceMode::sq;
  EngineKind engine = EngineKind::bilevel;
  SaddleConfig saddle;
  double delta = 0.01;  ///< confidence parameter inside the epoch engine's iota
  int batch = 0;        ///< epoch length for the epoch engine; 0 derives it from T
  bool epoch_posterior_terms = true;  ///< include KL(rho, q_t) in the epoch update
  std::uint64_t seed = 1;

  /// Dig-DEC with the engine that matches the divergence mode.
  static AgentConfig dig_dec(DivergenceMode mode, double eta) {
    AgentConfig c;
    c.mode = mode;
    c.eta = eta;
    c.engine = engine_for(mode);
    c.name = std::string("digdec_") + to_string(mode);
    return c;
  }
  /// KL-only AIR with Bayes posteriors.
  static AgentConfig phi_air(double eta) {
    AgentConfig c = dig_dec(DivergenceMode::none, eta);
    c.name = "phi_air";
    return c;
  }
  static AgentConfig optimistic(DivergenceMode mode, double eta) {
    AgentConfig c = dig_dec(mode, eta);
    c.rule = DecisionRule::optimistic;
    c.name = std::string("optimistic_") + to_string(mode);
    return c;
  }

  static EngineKind engine_for(DivergenceMode mode) {
    switch (mode) {
      case DivergenceMode::av: return EngineKind::epoch;
      case DivergenceMode::sq: return EngineKind::bilevel;
      case DivergenceMode::none: return EngineKind::bayes;
    }
    return EngineKind::bayes;
  }

  void validate() const {
    if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
    if (engine != engine_for(mode))
      throw InvalidArgument(std::string("engine ") + digdec::to_string(engine) +
                            " is incompatible with divergence mode " + digdec::to_string(mode));
    if (rule == DecisionRule::optimistic && mode == DivergenceMode::none)
      throw InvalidArgument("the optimistic rule needs a divergence (av or sq)");
    if (!(saddle.gap_tolerance > 0.0)) throw InvalidArgument("gap_tolerance must be positive");
    if (batch != 0 && engine != EngineKind::epoch) throw InvalidArgument("batch size applies to the epoch engine only");
  }
};

/// Everything the agent and harness know about one round.
struct RoundLog {
  int round = 0;
  std::vector<double> rho, p, nu;
  int policy = 0;
  int observation = 0;
  int model = 0;               ///< M_t (harness side)
  double realized_reward = 0.0;
  double expected_value = 0.0;  ///< E_{pi~p_t} V_{M_t}(pi)
  double air_value = 0.0;
  double gap = 0.0;
  bool gap_met = true;
  bool new_decision = false;   ///< a saddle was solved this round
};

/**
 * E2D agent: a decision rule (Dig-DEC or optimistic) plus a posterior-update
 * engine. Decisions are refreshed every tau rounds (tau = 1 outside the
 * epoch engine).
 */
class Agent {
 public:
  Agent(const DecisionProblem& prob, AgentConfig cfg, int T)
      : prob_(prob), cfg_((cfg.validate(), std::move(cfg))), T_(T), engine_(make_engine(prob, cfg_, T)) {
    tau_ = cfg_.engine == EngineKind::epoch ? std::get<EpochEngine>(engine_).tau() : 1;
  }

  const AgentConfig& config() const { return cfg_; }
  int tau() const { return tau_; }
  const SaddlePoint& decision() const { return saddle_; }
  int current_policy() const { return policy_; }
  const std::vector<double>& decision_rho() const { return decision_rho_; }

  const std::vector<double>& rho() const {
    return std::visit([](const auto& e) -> const std::vector<double>& { return e.rho(); }, engine_);
  }
  const EpochEngine* epoch_engine() const { return std::get_if<EpochEngine>(&engine_); }
  const BilevelEngine* bilevel_engine() const { return std::get_if<BilevelEngine>(&engine_); }

  /// Policy for round t (1-based). Solves a new saddle at the start of each
  /// batch, including a trailing short batch.
  int act(int t, Rng& rng) {
    fresh_ = (t - 1) % tau_ == 0;
    if (fresh_) {
      decision_rho_ = rho();
      saddle_ = cfg_.rule == DecisionRule::digdec
                    ? solve_minimax(prob_, decision_rho_, cfg_.eta, cfg_.mode, cfg_.saddle)
                    : solve_optimistic(prob_, decision_rho_, cfg_.eta, cfg_.mode, cfg_.saddle);
      policy_ = static_cast<int>(rng.categorical(saddle_.p));
    }
    return policy_;
  }

  bool fresh_decision() const { return fresh_; }

  void observe(int o) {
    std::visit([&](auto& e) { e.observe(saddle_.nu, policy_, o); }, engine_);
  }

 private:
  struct BayesState {
    explicit BayesState(const DecisionProblem& p) : prob(&p), rho_(p.num_infosets(), 1.0 / p.num_infosets()) {}
    const std::vector<double>& rho() const { return rho_; }
    void observe(std::span<const double> nu, int pi, int o) { rho_ = bayes_update(*prob, nu, pi, o); }
    const DecisionProblem* prob;
    std::vector<double> rho_;
  };

  using Engine = std::variant<BayesState, EpochEngine, BilevelEngine>;

  static Engine make_engine(const DecisionProblem& prob, const AgentConfig& cfg, int T) {
    switch (cfg.engine) {
      case EngineKind::epoch: return Engine(std::in_place_type<EpochEngine>, prob, T, cfg.delta, cfg.batch,
                                                         cfg.epoch_posterior_terms);
      case EngineKind::bilevel: return Engine(std::in_place_type<BilevelEngine>, prob);
      case EngineKind::bayes: break;
    }
    return Engine(std::in_place_type<BayesState>, prob);
  }

  const DecisionProblem& prob_;
  AgentConfig cfg_;
  int T_;
  Engine engine_;
  int tau_ = 1;
  SaddlePoint saddle_;
  std::vector<double> decision_rho_;
  int policy_ = 0;
  bool fresh_ = false;
};

/// The environment side of the protocol: picks M_t each round.
class World {
 public:
  /// Stochastic: M_t = M* for every round.
  static World stochastic(int model) {
    World w;
    w.fixed_ = model;
    return w;
  }
  /// Hybrid: M_t = (P*, R_t) with R_t from the adversary callback.
  static World hybrid(const Environment& env, int true_transition,
                      std::function<int(int, const std::vector<RoundLog>&)> adversary) {
    if (env.setting() != Setting::hybrid) throw InvalidArgument("hybrid world needs a hybrid instance");
    World w;
    w.env_ = &env;
    w.P_ = true_transition;
    w.adversary_ = std::move(adversary);
    return w;
  }

  bool is_hybrid() const { return static_cast<bool>(adversary_); }
  int true_transition() const { return P_; }

  int model_for(int t, const std::vector<RoundLog>& history) const {
    if (!adversary_) return fixed_;
    int r = adversary_(t, history);
    if (r < 0 || r >= env_->num_rewards()) throw InvalidArgument("adversary left the reward class");
    return env_->model_index(P_, r);
  }

 private:
  int fixed_ = 0;
  const Environment* env_ = nullptr;
  int P_ = 0;
  std::function<int(int, const std::vector<RoundLog>&)> adversary_;
};

/// Oblivious adversary alternating R_0, R_1, R_0, ...
inline std::function<int(int, const std::vector<RoundLog>&)> alternating_rewards(int num_rewards = 2) {
  return [num_rewards](int t, const std::vector<RoundLog>&) { return (t - 1) % num_rewards; };
}

/// One protocol round: decide, sample o ~ M_t(.|pi_t), update.
inline RoundLog agent_step(Agent& agent, const DecisionProblem& prob, const World& world, int t,
                           const std::vector<RoundLog>& history, Rng& rng) {
  RoundLog log;
  log.round = t;
  log.model = world.model_for(t, history);
  log.policy = agent.act(t, rng);
  const auto& sp = agent.decision();
  log.rho = agent.decision_rho();
  log.p = sp.p;
  log.nu = sp.nu;
  log.air_value = sp.air_value;
  log.gap = sp.gap;
  log.gap_met = sp.gap_met;
  log.new_decision = agent.fresh_decision();
  const auto& env = prob.env();
  log.observation = env.sample_observation(log.model, log.policy, rng);
  log.realized_reward = total_reward(env.model(log.model), env.observations(log.policy).at(log.observation));
  for (int pi = 0; pi < prob.num_policies(); ++pi) log.expected_value += sp.p[pi] * env.value(log.model, pi);
  agent.observe(log.observation);
  return log;
}

/// Best fixed policy in hindsight under the realized model sequence; ties to the lowest id.
inline int hybrid_comparator(const Environment& env, const std::vector<int>& models) {
  int best = 0;
  double bv = -std::numeric_limits<double>::infinity();
  for (int pi = 0; pi < env.num_policies(); ++pi) {
    double v = 0.0;
    for (int m : models) v += env.value(m, pi);
    if (v > bv + 1e-12) {
      bv = v;
      best = pi;
    }
  }
  return best;
}

struct RunTrace {
  std::vector<RoundLog> logs;
  int comparator = 0;
  int phi_star = 0;
  std::vector<double> pseudo_regret;    ///< per round
  std::vector<double> realized_regret;  ///< per round
  std::vector<EstTerms> est;            ///< per round, empty when the oracle is off
};

/**
 * Runs T rounds. The comparator is pi_{M*} (stochastic) or the best fixed
 * policy in hindsight (hybrid); regret uses exact values V_{M_t}.
 */
inline RunTrace run_episode_sequence(Agent& agent, const DecisionProblem& prob, const World& world,
                                     int T, Rng& rng, bool oracle = true) {
  RunTrace tr;
  tr.logs.reserve(T);
  for (int t = 1; t <= T; ++t) tr.logs.push_back(agent_step(agent, prob, world, t, tr.logs, rng));
  const auto& env = prob.env();
  if (world.is_hybrid()) {
    std::vector<int> models;
    for (const auto& l : tr.logs) models.push_back(l.model);
    tr.comparator = hybrid_comparator(env, models);
    tr.phi_star = prob.infoset_of(tr.logs.front().model, tr.comparator);
  } else {
    int m = tr.logs.front().model;
    tr.phi_star = -1;
    for (const auto& wp : prob.partition().world_points())
      if (wp.model == m) {
        tr.phi_star = wp.infoset;
        tr.comparator = wp.policy;
      }
    if (tr.phi_star < 0) throw InvalidArgument("true model has no world point");
  }
  for (const auto& l : tr.logs) {
    double best = env.value(l.model, tr.comparator);
    tr.pseudo_regret.push_back(best - l.expected_value);
    tr.realized_regret.push_back(best - l.realized_reward);
    if (oracle)
      tr.est.push_back(est_round(prob, l.p, l.rho, l.nu, l.model, tr.phi_star, agent.config().mode));
  }
  return tr;
}

}  // namespace digdec
