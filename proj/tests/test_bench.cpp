#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "digdec/acceptance.hpp"
#include "digdec/bench.hpp"
#include "digdec/config.hpp"

using namespace digdec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("digdec_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentConfig small_toy() {
  auto c = parse_config_text(
      "experiment = small\n"
      "instance = toy\n"
      "T = 24\n"
      "seeds = 3,4\n"
      "agents = digdec, optimistic\n"
      "mode = sq\n");
  c.validate();
  return c;
}

}  // namespace

TEST(Config, ParsesListsRangesAndComments) {
  auto c = parse_config_text(
      "# comment\n\n"
      "experiment = e1\n"
      "seeds = 1, 3-5\n"
      "agents = digdec,phi_air\n"
      "mode = av\n"
      "eta = 0.25\n"
      "oracle = off\n"
      "means = 0.1,0.2;0.3,0.4\n");
  EXPECT_EQ(c.experiment, "e1");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 3, 4, 5}));
  EXPECT_EQ(c.agents, (std::vector<std::string>{"digdec", "phi_air"}));
  EXPECT_EQ(c.mode, DivergenceMode::av);
  EXPECT_DOUBLE_EQ(c.eta, 0.25);
  EXPECT_FALSE(c.oracle);
  ASSERT_EQ(c.means.size(), 2u);
  EXPECT_DOUBLE_EQ(c.means[1][0], 0.3);
}

TEST(Config, ErrorsCarryLineAndKey) {
  try {
    parse_config_text("T = 10\neta = fast\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.key(), "eta");
  }
  try {
    parse_config_text("T = 10\n\nspeed = 3\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.key(), "speed");
  }
}

TEST(Config, DuplicateKeyRejected) {
  try {
    parse_config_text("T = 10\nT = 20\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.key(), "T");
  }
}

TEST(Config, MissingEqualsRejected) { EXPECT_THROW(parse_config_text("T 10\n"), ConfigError); }

TEST(Config, ValidationRejectsBadValues) {
  auto c = parse_config_text("seeds = 1\n");
  EXPECT_NO_THROW(c.validate());
  auto bad = [&](const std::string& extra) {
    auto d = parse_config_text("seeds = 1\n" + extra);
    EXPECT_THROW(d.validate(), ConfigError) << extra;
  };
  bad("eta = 0\n");
  bad("eta = -1\n");
  bad("T = 0\n");
  bad("agents = digdec, digdec\n");
  bad("agents = greedy\n");
  bad("batch = 3\n");
  bad("delta = 1\n");
  bad("mode = none\nagents = optimistic\n");
  bad("instance = bernoulli\n");
  bad("instance = custom\n");
  EXPECT_THROW(parse_config_text("seeds = 1\noracle = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config_text("seeds = 1\nmode = tv\n"), ConfigError);
}

TEST(Config, ZeroSeedsRejected) {
  auto c = parse_config_text("T = 10\n");
  EXPECT_THROW(c.validate(), ConfigError);
  auto d = parse_config_text("seeds = \n");
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Config, BadSeedRange) {
  EXPECT_THROW(parse_seed_list("5-2"), ConfigError);
  EXPECT_THROW(parse_seed_list("1,x"), ConfigError);
  EXPECT_EQ(parse_seed_list("7"), (std::vector<std::uint64_t>{7}));
}

TEST(Config, ShippedConfigsLoadAndValidate) {
  for (const auto& entry : fs::directory_iterator(fs::path(DIGDEC_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".cfg") continue;
    auto c = load_config(entry.path().string());
    EXPECT_NO_THROW(c.validate()) << entry.path();
    EXPECT_NO_THROW(make_problem(c)) << entry.path();
  }
}

TEST(Csv, Fmt12RoundTrips) {
  EXPECT_EQ(fmt12(0.5), "0.5");
  EXPECT_EQ(fmt12(std::nan("")), "nan");
  EXPECT_EQ(fmt12(1.0 / 3.0), "0.333333333333");
  EXPECT_DOUBLE_EQ(round12(1.0 / 3.0), 0.333333333333);
}

TEST(Csv, ToyPresetEmitsBothAgents) {
  auto dir = fresh_dir("toy");
  auto c = small_toy();
  auto res = cmd_run(c, dir.string());
  ASSERT_EQ(res.files.size(), 5u);
  for (const char* agent : {"digdec", "optimistic"})
    for (int seed : {3, 4}) {
      auto p = dir / run_file_name("small", agent, seed);
      ASSERT_TRUE(fs::exists(p)) << p;
      auto rows = read_csv(p);
      ASSERT_EQ(rows.size(), 25u);
      EXPECT_EQ(rows[0].size(), 9u);
      EXPECT_EQ(rows[1][1], agent);
      EXPECT_EQ(rows[24][3], "24");
    }
  EXPECT_FALSE(fs::exists(dir / "small_aggregate.csv.tmp"));
  fs::remove_all(dir);
}

TEST(Csv, SameSeedsGiveIdenticalBytes) {
  auto d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  auto c = small_toy();
  auto a = cmd_run(c, d1.string());
  auto b = cmd_run(c, d2.string());
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i)
    EXPECT_EQ(slurp(a.files[i]), slurp(b.files[i])) << a.files[i];
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Csv, CumulativeColumnsMatchTrace) {
  auto dir = fresh_dir("cum");
  auto c = small_toy();
  auto res = cmd_run(c, dir.string());
  const auto& tr = res.traces[0];
  auto rows = read_csv(res.files[0]);
  const int pr = column(rows[0], "pseudo_regret_cum");
  const int kl = column(rows[0], "est_kl_cum");
  double sum = 0.0, klsum = 0.0;
  for (std::size_t t = 0; t < tr.logs.size(); ++t) {
    sum += tr.pseudo_regret[t];
    klsum += tr.est[t].kl;
    EXPECT_NEAR(std::stod(rows[t + 1][pr]), sum, 1e-10 * (1 + std::abs(sum)));
    EXPECT_NEAR(std::stod(rows[t + 1][kl]), klsum, 1e-10 * (1 + std::abs(klsum)));
  }
  fs::remove_all(dir);
}

TEST(Csv, OracleOffWritesNan) {
  auto dir = fresh_dir("nooracle");
  auto c = small_toy();
  c.oracle = false;
  c.agents = {"digdec"};
  auto res = cmd_run(c, dir.string());
  auto rows = read_csv(res.files[0]);
  EXPECT_EQ(rows[1][column(rows[0], "est_kl_cum")], "nan");
  EXPECT_EQ(rows[1][column(rows[0], "est_div_cum")], "nan");
  fs::remove_all(dir);
}

TEST(Csv, AggregateRecomputedFromRunFiles) {
  auto dir = fresh_dir("agg");
  auto c = small_toy();
  auto res = cmd_run(c, dir.string());
  auto agg = read_csv(dir / "small_aggregate.csv");
  ASSERT_EQ(agg.size(), 1u + 2u * 24u);
  std::map<std::string, std::vector<std::vector<std::vector<std::string>>>> per_agent;
  for (std::size_t i = 0; i + 1 < res.files.size(); ++i) {
    auto rows = read_csv(res.files[i]);
    per_agent[rows[1][1]].push_back(rows);
  }
  const auto& h = agg[0];
  for (std::size_t i = 1; i < agg.size(); ++i) {
    const auto& row = agg[i];
    const auto& runs = per_agent.at(row[column(h, "agent")]);
    const int round = std::stoi(row[column(h, "round")]);
    EXPECT_EQ(std::stoi(row[column(h, "seeds")]), 2);
    for (const std::string f : {"pseudo_regret", "realized_regret", "est_kl", "est_div"}) {
      const int src = column(runs[0][0], f + "_cum");
      double sum = 0.0, lo = INFINITY, hi = -INFINITY;
      for (const auto& r : runs) {
        double x = std::stod(r[round][src]);
        sum += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      const double mean = sum / runs.size();
      EXPECT_NEAR(std::stod(row[column(h, f + "_mean")]), mean, 1e-11 * (1 + std::abs(mean))) << f;
      EXPECT_EQ(std::stod(row[column(h, f + "_min")]), lo) << f;
      EXPECT_EQ(std::stod(row[column(h, f + "_max")]), hi) << f;
    }
  }
  fs::remove_all(dir);
}

TEST(Csv, AggregateRejectsRaggedRuns) {
  RegretRecord r;
  r.agent = "a";
  std::vector<std::vector<RegretRecord>> runs{{r, r}, {r}};
  EXPECT_THROW(aggregate_csv(runs), InvalidArgument);
}

TEST(Dec, SingleInfosetTableIsZero) {
  auto c = parse_config_text("instance = bernoulli\nmeans = 0.2,0.7\nseeds = 1\n");
  const auto prob = make_problem(c);
  ASSERT_EQ(prob.num_infosets(), 1);
  auto rows = cmd_digdec(prob, {0.5, 1.0}, DivergenceMode::sq);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.digdec, 0.0, 1e-6);
    EXPECT_NEAR(r.odec, 0.0, 1e-6);
    EXPECT_DOUBLE_EQ(r.grid_slack, 0.0);
    EXPECT_TRUE(r.holds);
  }
  auto csv = dec_csv("bernoulli", DivergenceMode::sq, rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kDecHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Dec, GridSlackFormula) {
  EXPECT_DOUBLE_EQ(odec_grid_slack(3, 0.5, 20), 3.0 * 2.0 / 20.0);
  EXPECT_DOUBLE_EQ(odec_grid_slack(1, 2.0, 10), 0.0);
}

TEST(Dec, TooManyInfosetsRejected) {
  auto c = parse_config_text("instance = bernoulli\nmeans = 0.1;0.2;0.3;0.4;0.5\nseeds = 1\n");
  const auto prob = make_problem(c);
  ASSERT_EQ(prob.num_infosets(), 5);
  EXPECT_THROW(cmd_digdec(prob, {1.0}, DivergenceMode::sq), CapExceeded);
}

TEST(Acceptance, ScaledAverageDivergenceIsCaught) {
  acceptance::Suite honest({1.0, "", nullptr});
  EXPECT_TRUE(honest.divergence_ordering().pass);
  acceptance::Suite mutated({1.5, "", nullptr});
  auto r = mutated.divergence_ordering();
  EXPECT_FALSE(r.pass) << r.detail;
}

TEST(Acceptance, FormatLine) {
  acceptance::Result r{3, "closed_form_updates", true, "ok"};
  EXPECT_EQ(acceptance::format_line(r), "criterion 3 PASS closed_form_updates: ok");
}
