#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "digdec/acceptance.hpp"
#include "digdec/bench.hpp"
#include "digdec/config.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::string seeds;
  std::optional<double> eta;
  std::string mode;
  std::string oracle;
};

void apply(digdec::ExperimentConfig& c, const Overrides& o) {
  if (!o.seeds.empty()) c.seeds = digdec::parse_seed_list(o.seeds, 0, "--seeds");
  if (o.eta) c.eta = *o.eta;
  if (!o.mode.empty()) c.mode = digdec::parse_mode(o.mode);
  if (!o.oracle.empty()) c.oracle = o.oracle == "on";
}

std::string resolve_out(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  return digdec::default_out_dir();
}

int cmd_run(const Overrides& o) {
  auto c = digdec::load_config(o.config);
  apply(c, o);
  c.validate();
  const std::string out = resolve_out(o.out, c.out);
  auto res = digdec::cmd_run(c, out, &std::cout);
  std::cout << "aggregate -> " << res.files.back() << '\n';
  return 0;
}

int cmd_digdec(const Overrides& o, const std::string& instance, std::vector<double> etas, int resolution,
               bool nested) {
  digdec::ExperimentConfig c;
  if (!o.config.empty()) c = digdec::load_config(o.config);
  if (!instance.empty()) c.instance = instance;
  if (!o.mode.empty()) c.mode = digdec::parse_mode(o.mode);
  if (o.eta) etas = {*o.eta};
  if (etas.empty()) etas = {0.5, 1.0, 2.0};
  digdec::SaddleConfig cfg;
  cfg.grid_resolution = resolution;
  cfg.gap_tolerance = c.gap_tolerance;
  const auto prob = digdec::make_problem(c);
  auto rows = digdec::cmd_digdec(prob, etas, c.mode, cfg, nested);
  const std::string csv = digdec::dec_csv(c.instance, c.mode, rows);
  std::cout << csv;
  if (!o.out.empty() || std::getenv(digdec::kOutDirEnv)) {
    auto path = std::filesystem::path(resolve_out(o.out, "")) /
                ("digdec_" + c.instance + "_" + digdec::to_string(c.mode) + ".csv");
    digdec::write_atomically(path, csv);
    std::cerr << "table -> " << path.string() << '\n';
  }
  return 0;
}

int cmd_verify(const std::string& out, bool quiet) {
  digdec::acceptance::Options opt;
  if (!out.empty()) opt.scratch_dir = (std::filesystem::path(out) / "verify_scratch").string();
  if (!quiet) opt.progress = &std::cerr;
  digdec::acceptance::Suite suite(opt);
  bool all = true;
  suite.run_all([&](const digdec::acceptance::Result& r) {
    all = all && r.pass;
    std::cout << digdec::acceptance::format_line(r) << std::endl;
  });
  std::cout << (all ? "ALL PASS" : "FAILURES") << '\n';
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-estimation laboratory: agents, dig-dec tables and acceptance checks"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory (default: $DIGDEC_OUT_DIR, else ./out)");
    sub->add_option("--eta", o.eta, "Learning rate eta > 0");
    sub->add_option("--mode", o.mode, "Divergence mode")->check(CLI::IsMember({"av", "sq", "none"}));
  };

  auto* run = app.add_subcommand("run", "Run every (agent, seed) of an experiment and write CSVs");
  run->add_option("--config", o.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seeds", o.seeds, "Seed list, e.g. 1,2,5-8 (overrides the config)");
  run->add_option("--oracle", o.oracle, "Est diagnostics")->check(CLI::IsMember({"on", "off"}));
  add_common(run);

  std::string instance;
  std::vector<double> etas;
  int resolution = 20;
  bool nested = false;
  auto* dd = app.add_subcommand("digdec", "Estimate dig-dec and o-dec on a small instance");
  dd->add_option("--config", o.config, "Config file naming the instance")->check(CLI::ExistingFile);
  dd->add_option("--instance", instance, "Instance preset")->check(CLI::IsMember(digdec::instance_names()));
  dd->add_option("--etas", etas, "Several eta values");
  dd->add_option("--resolution", resolution, "rho grid resolution 1/h")->check(CLI::PositiveNumber);
  dd->add_flag("--nested", nested, "Repeat dig-dec on the doubled grid (at most 3 infosets)");
  add_common(dd);

  bool quiet = false;
  auto* verify = app.add_subcommand("verify", "Run the acceptance suite and print a pass/fail table");
  verify->add_option("--out", o.out, "Scratch directory for the determinism check");
  verify->add_flag("--quiet", quiet, "No progress output on stderr");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(o);
    if (*dd) return cmd_digdec(o, instance, etas, resolution, nested);
    if (*verify) return cmd_verify(o.out, quiet);
  } catch (const digdec::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
