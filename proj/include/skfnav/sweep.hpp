#pragma once

// Parameter sweeps over a base case, aggregation and report output.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "skfnav/harness.hpp"

namespace skfnav {

struct SweepAxis {
  std::string name;  // q_x, q_p, r, A, B, C or delta
  std::vector<double> values;
};

struct SweepGrid {
  std::string id = "sweep";
  nlohmann::json base;  // case config the axes are applied to
  std::filesystem::path base_dir;
  std::vector<SweepAxis> axes;
  int replications = 1;
  std::uint64_t seed = 0;
  std::optional<double> q_x_over_r;  // q_x tied to r when set
  bool count_yellow = false;         // success = green (or yellow too)
  std::optional<int> branches;

  [[nodiscard]] std::size_t cell_count() const;
  [[nodiscard]] std::size_t run_count() const { return cell_count() * replications; }
  void validate() const;
};

/// {"sweep_id", "base" | "base_config", "axes": {name: [values]},
///  "replications", "seed", "q_x_over_r", "count_yellow"}
SweepGrid sweep_grid_from_json(const nlohmann::json& j,
                               const std::filesystem::path& base_dir);
SweepGrid load_sweep_grid(const std::filesystem::path& path);

struct SweepCell {
  std::vector<double> values;  // one per axis, grid order
  CaseConfig config;
};

/// Cartesian product, last axis fastest.
std::vector<SweepCell> expand(const SweepGrid& grid);

/// Worker count: SKFNAV_THREADS when set, else hardware concurrency; never
/// more than `jobs`.
unsigned worker_threads(std::size_t jobs);

struct AggregateRow {
  std::string axis;
  double value = 0.0;
  std::optional<double> q_p;  // none: pooled over every q_p
  std::size_t count = 0;
  std::size_t successes = 0;
  std::size_t failed = 0;
  double success_rate = 0.0;
  std::vector<double> median_rmse;  // NaN entries excluded; NaN if none left
};

/// Success rate and median RMSE per axis value, pooled and per fixed q_p.
std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records,
                                    const std::vector<std::string>& axes,
                                    bool count_yellow = false);
std::string aggregates_csv(const std::vector<AggregateRow>& rows,
                           const std::vector<std::string>& state_names);

double median(std::vector<double> values);

struct SweepResult {
  std::vector<RunRecord> records;  // canonical order
  std::vector<AggregateRow> aggregates;
};

/// Runs every cell and replicate; per-run failures are recorded, not thrown.
/// `seed_override` replaces the grid's base seed.
SweepResult run_sweep(const SweepGrid& grid,
                      std::optional<std::uint64_t> seed_override = std::nullopt);

/// Runs `jobs` independent cases on the worker pool; results keep job order.
std::vector<RunRecord> run_parallel(const std::vector<std::pair<CaseConfig, std::uint64_t>>& jobs);

// ---------------------------------------------------------------- suites

/// A list of standalone cases reported together.
/// {"suite_id", "cases": [paths], "select", "replications"}
struct Suite {
  std::string id = "suite";
  std::vector<CaseConfig> cases;
  std::string select;
  int replications = 1;  // extra seeds derived from each case seed
};

Suite load_suite(const std::filesystem::path& path);

/// Every case at its own seed (or `seed_override`), replicate r > 0 at a
/// derived seed. Records follow the suite order.
std::vector<RunRecord> run_suite(const Suite& suite,
                                 std::optional<std::uint64_t> seed_override = std::nullopt,
                                 std::optional<int> branches = std::nullopt);

// ---------------------------------------------------------------- report

/// Plot data: {"kind", "axis", "x": [...], "series": [{"label", "y": [...]}]}.
/// Non-finite y values are written as null.
std::vector<std::pair<std::string, nlohmann::json>> plot_documents(
    const std::vector<AggregateRow>& rows, const std::vector<std::string>& axes,
    const std::vector<std::string>& state_names);

/// Empty string when `doc` matches the plot schema, else the first problem.
std::string validate_plot_json(const nlohmann::json& doc);

/// One row per record whose name contains `select`, shaped like the
/// representative-test tables of each scenario. Throws ConfigError when the
/// selection is empty.
std::string report_table(const std::vector<RunRecord>& records,
                         const std::string& select = "");

/// Writes records.csv, timings.csv, aggregates.csv, plots/*.json, config.json
/// and config_hash.txt under `dir`.
void write_outputs(const std::filesystem::path& dir, const nlohmann::json& config_echo,
                   const std::vector<RunRecord>& records,
                   const std::vector<AggregateRow>& aggregates,
                   const std::vector<std::string>& axes);

}  // namespace skfnav
