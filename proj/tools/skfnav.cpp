// Command-line front end: simulate, sweep, report, validate-config.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "skfnav/errors.hpp"
#include "skfnav/harness.hpp"
#include "skfnav/io.hpp"
#include "skfnav/sweep.hpp"

namespace fs = std::filesystem;
using namespace skfnav;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::optional<int> branches;
  bool quiet = false;
  int verbose = 0;
};

void say(const Options& o, const std::string& line) {
  if (!o.quiet) std::cout << line << '\n';
}

std::string describe(const RunRecord& r) {
  std::string s = r.name + " seed=" + std::to_string(r.seed) + " outcome=" +
                  to_string(r.outcome) + " estimated_switch=" +
                  (r.estimated_switch ? io::format_double(*r.estimated_switch) : "none");
  if (!r.ok) s += " FAILED: " + r.error;
  return s;
}

bool expectation_met(const CaseConfig& c, const RunRecord& r) {
  return !c.expect_outcome || (r.ok && *c.expect_outcome == r.outcome);
}

int simulate(const Options& o, const std::string& scenario) {
  CaseConfig c = load_case_config(o.config);
  if (!scenario.empty() && scenario != to_string(c.scenario)) {
    throw ConfigError("config describes a " + to_string(c.scenario) +
                      " case, not " + scenario);
  }
  if (o.branches) c.branches = *o.branches;
  RunOptions opts;
  opts.keep_details = true;
  const RunResult res = run_case(c, o.seed.value_or(c.seed()), opts);
  const fs::path dir = fs::path(o.out) / c.name;
  io::write_text_file(dir / "records.csv", records_csv({res.record}));
  io::write_text_file(dir / "timings.csv", timings_csv({res.record}));
  io::write_text_file(dir / "config.json", c.source.dump(2) + "\n");
  io::write_text_file(dir / "config_hash.txt", res.record.config_hash + "\n");
  if (res.record.ok) {
    io::write_text_file(dir / "trajectory.csv", trajectory_csv(res));
    io::write_text_file(dir / "measurements.csv", measurements_csv(res));
    std::vector<std::string> names = res.record.state_names;
    if (c.scenario == ScenarioKind::Shuttle) {
      names = nav::state_names();
    }
    const int d_theta = c.scenario == ScenarioKind::Balloon ? 3 : 9;
    for (int i = 0; i < d_theta; ++i) names.push_back("theta" + std::to_string(i));
    io::write_text_file(dir / "branches.csv", branch_trajectory_csv(*res.branches, names));
  }
  say(o, describe(res.record));
  if (o.verbose > 0 && res.record.ok) {
    for (std::size_t i = 0; i < res.record.rmse.size(); ++i) {
      say(o, "  rmse_" + res.record.state_names[i] + "=" +
                 io::format_double(res.record.rmse[i]));
    }
  }
  if (!res.record.ok) return kRunFailure;
  if (!expectation_met(c, res.record)) {
    say(o, "expected outcome " + to_string(*c.expect_outcome));
    return kRunFailure;
  }
  return kOk;
}

int sweep(const Options& o) {
  SweepGrid g = load_sweep_grid(o.config);
  if (o.branches) g.branches = *o.branches;
  say(o, "sweep " + g.id + ": " + std::to_string(g.cell_count()) + " cells x " +
             std::to_string(g.replications) + " replications");
  const SweepResult res = run_sweep(g, o.seed);
  std::vector<std::string> axes;
  for (const auto& a : g.axes) axes.push_back(a.name);
  write_outputs(fs::path(o.out) / g.id, io::read_json_file(o.config), res.records,
                res.aggregates, axes);
  std::size_t failed = 0, green = 0;
  for (const auto& r : res.records) {
    if (!r.ok) ++failed;
    if (r.success(g.count_yellow)) ++green;
    if (o.verbose > 0) say(o, describe(r));
  }
  say(o, std::to_string(res.records.size()) + " runs, " + std::to_string(green) +
             " successful, " + std::to_string(failed) + " failed");
  return failed ? kRunFailure : kOk;
}

int report(const Options& o) {
  const Suite s = load_suite(o.config);
  const auto records = run_suite(s, o.seed, o.branches);
  const std::string table = report_table(records, s.select);
  std::vector<std::string> axes;
  for (const char* axis : {"q_x", "q_p", "r", "A", "B", "C", "delta"}) {
    std::set<double> values;
    for (const auto& r : records) values.insert(r.axis_value(axis));
    if (values.size() > 1) axes.push_back(axis);
  }
  const fs::path dir = fs::path(o.out) / s.id;
  write_outputs(dir, io::read_json_file(o.config), records, aggregate(records, axes), axes);
  io::write_text_file(dir / "table.csv", table);
  if (o.verbose > 0) std::cout << table;

  int code = kOk;
  for (const auto& r : records) {
    say(o, describe(r));
    for (const auto& c : s.cases) {
      if (c.name == r.name && !expectation_met(c, r)) {
        say(o, "  expected outcome " + to_string(*c.expect_outcome));
        code = kRunFailure;
      }
    }
    if (!r.ok) code = kRunFailure;
  }
  return code;
}

int validate(const Options& o) {
  const nlohmann::json j = io::read_json_file(o.config);
  if (j.is_object() && j.contains("axes")) {
    const SweepGrid g = load_sweep_grid(o.config);
    expand(g);
    say(o, "valid sweep config: " + std::to_string(g.run_count()) + " runs");
  } else if (j.is_object() && j.contains("cases")) {
    const Suite s = load_suite(o.config);
    say(o, "valid suite config: " + std::to_string(s.cases.size()) + " cases");
  } else {
    const CaseConfig c = load_case_config(o.config);
    say(o, "valid " + to_string(c.scenario) + " config: " + c.name);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Switching Kalman filter experiments"};
  app.require_subcommand(1);
  Options o;
  std::string scenario;

  auto add_common = [&](CLI::App* sub, bool runs) {
    sub->add_option("--config", o.config, "Configuration file")->required();
    if (!runs) return;
    sub->add_option("--seed", o.seed, "Override the random seed");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--branches", o.branches, "Branch capacity M (default 10)")
        ->check(CLI::Range(2, 1000000));
  };
  app.add_flag("--quiet,-q", o.quiet, "Only report errors");
  app.add_flag("-v,--verbose", o.verbose, "More output");

  auto* sim = app.add_subcommand("simulate", "Run one case");
  sim->add_option("scenario", scenario, "balloon or shuttle")
      ->check(CLI::IsMember({"balloon", "shuttle"}));
  add_common(sim, true);
  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep");
  add_common(sw, true);
  auto* rep = app.add_subcommand("report", "Run a suite of cases and tabulate");
  add_common(rep, true);
  auto* val = app.add_subcommand("validate-config", "Check a configuration file");
  add_common(val, false);
  for (auto* sub : {sim, sw, rep, val}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sim) return simulate(o, scenario);
    if (*sw) return sweep(o);
    if (*rep) return report(o);
    return validate(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunFailure;
  }
}
