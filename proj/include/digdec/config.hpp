#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "digdec/divergences.hpp"
#include "digdec/errors.hpp"

namespace digdec {

/**
 * Experiment description. Text grammar, one entry per line:
 *
 *   line    := blank | '#' comment | key '=' value
 *   key     := [A-Za-z0-9_]+
 *   value   := text up to end of line, surrounding whitespace trimmed
 *
 * Keys may appear at most once. Lists are comma separated; seed lists also
 * accept inclusive ranges "a-b". Bernoulli means use ';' between worlds and
 * ',' between arms.
 *
 * A custom instance (instance = custom) is spelled out with
 *   setting         stochastic | hybrid
 *   layers          states per layer, e.g. 1,3 (the first layer has one state)
 *   actions         action count
 *   reward_support  shared reward values in [0,1]
 *   model_<i>_next, model_<i>_reward        stochastic model i
 *   transition_<i>, reward_<j>, features    hybrid class
 *   partition       plain | complete (stochastic)
 * Row lists separate rows with ';' and entries with ','. Rows run over
 * (layer, state, action) in lexicographic order; next-state rows cover every
 * layer but the last, reward and feature rows cover all layers. The policy
 * class is every deterministic policy.
 */
struct ExperimentConfig {
  std::string experiment = "experiment";
  std::string instance = "toy";     ///< toy | two_world | three_world | bernoulli | chain | chain_complete | hybrid_chain
  int T = 256;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> agents{"digdec"};  ///< digdec | optimistic | phi_air
  DivergenceMode mode = DivergenceMode::sq;
  double eta = 1.0;
  bool oracle = true;
  std::string out;
  double epsilon_ratio = 0.5;       ///< toy only
  std::vector<std::vector<double>> means;  ///< bernoulli only
  int true_model = 0;               ///< M* (stochastic) or P* (hybrid)
  std::string adversary = "alternating";  ///< hybrid: alternating | constant:<j>
  double gap_tolerance = 1e-4;
  double delta = 0.01;
  int batch = 0;
  bool epoch_posterior_terms = true;

  // instance = custom
  using Rows = std::vector<std::vector<double>>;
  std::string setting = "stochastic";
  std::vector<int> layers;
  int actions = 0;
  std::vector<double> reward_support;
  std::map<int, Rows> model_next, model_reward;
  std::map<int, Rows> transition_next, reward_rows;
  Rows features;
  std::string partition = "plain";

  /// Checks cross-field constraints; line 0 marks errors not tied to a line.
  void validate() const {
    if (T < 1) throw ConfigError(0, "T", "must be at least 1");
    if (seeds.empty()) throw ConfigError(0, "seeds", "at least one seed is required");
    if (agents.empty()) throw ConfigError(0, "agents", "at least one agent is required");
    std::set<std::string> seen;
    for (const auto& a : agents) {
      if (a != "digdec" && a != "optimistic" && a != "phi_air")
        throw ConfigError(0, "agents", "unknown agent '" + a + "'");
      if (!seen.insert(a).second) throw ConfigError(0, "agents", "duplicate agent '" + a + "'");
      if (a == "optimistic" && mode == DivergenceMode::none)
        throw ConfigError(0, "mode", "the optimistic agent needs mode av or sq");
    }
    if (!(eta > 0.0)) throw ConfigError(0, "eta", "must be positive");
    if (!(gap_tolerance > 0.0)) throw ConfigError(0, "gap_tolerance", "must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError(0, "delta", "must lie in (0,1)");
    if (batch < 0 || batch % 2 != 0) throw ConfigError(0, "batch", "must be 0 or a positive even integer");
    if (instance == "bernoulli" && means.empty()) throw ConfigError(0, "means", "required for instance bernoulli");
    if (instance == "custom") {
      if (layers.empty()) throw ConfigError(0, "layers", "required for instance custom");
      if (actions < 1) throw ConfigError(0, "actions", "required for instance custom");
      if (reward_support.empty()) throw ConfigError(0, "reward_support", "required for instance custom");
      if (setting != "stochastic" && setting != "hybrid")
        throw ConfigError(0, "setting", "expected stochastic or hybrid, got '" + setting + "'");
      if (partition != "plain" && partition != "complete")
        throw ConfigError(0, "partition", "expected plain or complete, got '" + partition + "'");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

inline double parse_double(const std::string& v, int line, const std::string& key) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(line, key, "expected a number, got '" + v + "'");
  return x;
}

template <class Int>
Int parse_int(const std::string& v, int line, const std::string& key) {
  Int x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(line, key, "expected an integer, got '" + v + "'");
  return x;
}

inline std::vector<std::vector<double>> parse_rows(const std::string& v, int line, const std::string& key) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : split(v, ';')) {
    std::vector<double> row;
    for (const auto& x : split(r, ',')) row.push_back(parse_double(x, line, key));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// "model_3_next" with prefix "model_" and suffix "_next" -> 3; -1 when the key does not match.
inline int indexed_key(const std::string& key, const std::string& prefix, const std::string& suffix) {
  if (key.size() <= prefix.size() + suffix.size() || key.rfind(prefix, 0) != 0) return -1;
  if (key.compare(key.size() - suffix.size(), suffix.size(), suffix) != 0) return -1;
  std::string mid = key.substr(prefix.size(), key.size() - prefix.size() - suffix.size());
  int i = 0;
  auto [p, ec] = std::from_chars(mid.data(), mid.data() + mid.size(), i);
  if (ec != std::errc() || p != mid.data() + mid.size() || i < 0) return -1;
  return i;
}

inline bool parse_switch(const std::string& v, int line, const std::string& key) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError(line, key, "expected on or off, got '" + v + "'");
}

}  // namespace detail

/// "1,2,5-8" -> {1,2,5,6,7,8}. An empty list is returned as is.
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text, int line = 0,
                                                  const std::string& key = "seeds") {
  std::vector<std::uint64_t> out;
  if (detail::trim(text).empty()) return out;
  for (const auto& item : detail::split(text, ',')) {
    auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(detail::parse_int<std::uint64_t>(item, line, key));
      continue;
    }
    auto lo = detail::parse_int<std::uint64_t>(detail::trim(item.substr(0, dash)), line, key);
    auto hi = detail::parse_int<std::uint64_t>(detail::trim(item.substr(dash + 1)), line, key);
    if (hi < lo || hi - lo > 100000) throw ConfigError(line, key, "bad seed range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  return out;
}

/// Sets one key; `line` is used for diagnostics only.
inline void apply_config_entry(ExperimentConfig& c, const std::string& key, const std::string& v, int line) {
  using namespace detail;
  if (key == "experiment") c.experiment = v;
  else if (key == "instance") c.instance = v;
  else if (key == "T") c.T = parse_int<int>(v, line, key);
  else if (key == "seeds") c.seeds = parse_seed_list(v, line, key);
  else if (key == "agents") c.agents = split(v, ',');
  else if (key == "mode") {
    try {
      c.mode = parse_mode(v);
    } catch (const InvalidArgument&) {
      throw ConfigError(line, key, "expected av, sq or none, got '" + v + "'");
    }
  } else if (key == "eta") c.eta = parse_double(v, line, key);
  else if (key == "oracle") c.oracle = parse_switch(v, line, key);
  else if (key == "out") c.out = v;
  else if (key == "epsilon_ratio") c.epsilon_ratio = parse_double(v, line, key);
  else if (key == "means") c.means = parse_rows(v, line, key);
  else if (key == "epoch_posterior_terms") c.epoch_posterior_terms = parse_switch(v, line, key);
  else if (key == "setting") c.setting = v;
  else if (key == "layers") {
    c.layers.clear();
    for (const auto& x : split(v, ',')) c.layers.push_back(parse_int<int>(x, line, key));
  } else if (key == "actions") c.actions = parse_int<int>(v, line, key);
  else if (key == "reward_support") {
    c.reward_support.clear();
    for (const auto& x : split(v, ',')) c.reward_support.push_back(parse_double(x, line, key));
  } else if (key == "features") c.features = parse_rows(v, line, key);
  else if (key == "partition") c.partition = v;
  else if (int i = indexed_key(key, "model_", "_next"); i >= 0) c.model_next[i] = parse_rows(v, line, key);
  else if (int i = indexed_key(key, "model_", "_reward"); i >= 0) c.model_reward[i] = parse_rows(v, line, key);
  else if (int i = indexed_key(key, "transition_", ""); i >= 0) c.transition_next[i] = parse_rows(v, line, key);
  else if (int i = indexed_key(key, "reward_", ""); i >= 0) c.reward_rows[i] = parse_rows(v, line, key);
  else if (key == "true_model") c.true_model = parse_int<int>(v, line, key);
  else if (key == "adversary") c.adversary = v;
  else if (key == "gap_tolerance") c.gap_tolerance = parse_double(v, line, key);
  else if (key == "delta") c.delta = parse_double(v, line, key);
  else if (key == "batch") c.batch = parse_int<int>(v, line, key);
  else throw ConfigError(line, key, "unknown key");
}

/// Parses the grammar above; does not call validate().
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "", "expected key = value");
    std::string key = detail::trim(s.substr(0, eq));
    std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "", "empty key");
    if (!seen.insert(key).second) throw ConfigError(line, key, "duplicate key");
    apply_config_entry(c, key, value, line);
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot open '" + path + "'");
  return parse_config(in);
}

}  // namespace digdec
