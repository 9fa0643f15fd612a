#pragma once

// Single-case runner: scenario generation, switching filter, metrics.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "skfnav/scenarios.hpp"
#include "skfnav/switching_filter.hpp"

namespace skfnav {

enum class Outcome { Green, Yellow, Red };
std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

enum class ScenarioKind { Balloon, Shuttle };
std::string to_string(ScenarioKind s);

/// A scenario configuration plus the run-level settings shared by both
/// scenarios.
struct CaseConfig {
  std::string name;
  ScenarioKind scenario = ScenarioKind::Balloon;
  BalloonConfig balloon;
  ShuttleConfig shuttle;
  int branches = 10;
  std::optional<Outcome> expect_outcome;
  nlohmann::json source;  // configuration as read, used for echo and hashing

  [[nodiscard]] std::uint64_t seed() const;
  void set_seed(std::uint64_t seed);
  [[nodiscard]] double dt() const;
  [[nodiscard]] long steps() const;
  [[nodiscard]] int delta() const;
  [[nodiscard]] std::optional<double> true_switch() const;
  [[nodiscard]] bool bias_zero() const;
  [[nodiscard]] const BiasSpec& bias() const;
  [[nodiscard]] double q_x() const;
  [[nodiscard]] double q_p() const;
  [[nodiscard]] double r() const;
  /// FNV-1a of the canonical JSON dump with the seed removed.
  [[nodiscard]] std::string config_hash() const;
};

/// `scenario` defaults to "balloon". Throws ConfigError on any schema problem.
CaseConfig case_config_from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir,
                                 const std::string& fallback_name = "case");
CaseConfig load_case_config(const std::filesystem::path& path);

/// Relative RMSE per state: sqrt(sum (m - x)^2 / sum x^2). States whose truth
/// is identically zero come back as NaN.
Vector rmse(const std::vector<Vector>& estimate, const std::vector<Vector>& truth);

/// Green when the switch is recovered within one step, Yellow within ten,
/// Red otherwise. For an uncorrupted run, Green when the nominal branch wins
/// or the reported switch lies in the last 5% of the timeline.
Outcome classify(std::optional<double> estimated, std::optional<double> true_switch,
                 long n_steps, double dt, bool bias_zero);

struct RunRecord {
  std::string name;
  ScenarioKind scenario = ScenarioKind::Balloon;
  std::string config_hash;
  std::uint64_t seed = 0;
  double q_x = 0.0, q_p = 0.0, r = 0.0;
  int delta = 1;
  BiasCoeffs bias;  // first channel
  double dt = 0.0;
  long steps = 0;
  std::optional<double> true_switch;
  std::optional<double> estimated_switch;
  std::optional<double> delta_steps;
  Outcome outcome = Outcome::Red;
  bool ok = true;
  std::string error;
  std::vector<std::string> state_names;
  std::vector<double> rmse;
  double runtime_s = 0.0;

  [[nodiscard]] bool success(bool count_yellow = false) const {
    return ok && (outcome == Outcome::Green ||
                  (count_yellow && outcome == Outcome::Yellow));
  }
  /// Value of a sweep axis (q_x, q_p, r, A, B, C, delta).
  [[nodiscard]] double axis_value(const std::string& axis) const;
};

struct RunOptions {
  bool keep_details = false;
  const StepHooks* hooks = nullptr;
};

struct RunResult {
  RunRecord record;
  // Filled when keep_details is set and the run completed.
  std::vector<double> times;
  std::vector<Vector> truth;     // RMSE truth, steps 0..n
  std::vector<Vector> estimate;  // best branch means (state part), steps 0..n
  std::vector<Observation> observations;
  std::optional<BranchSet> branches;
};

/// Runs the full pipeline. Numerical and domain failures are captured in the
/// record (ok = false, outcome Red); configuration errors propagate.
RunResult run_case(const CaseConfig& cfg, std::uint64_t seed,
                   const RunOptions& options = {});

/// Canonical order: name, config hash, seed.
void sort_records(std::vector<RunRecord>& records);

/// Deterministic CSV (no runtime column). All records must share state names.
std::string records_csv(const std::vector<RunRecord>& records);
std::string timings_csv(const std::vector<RunRecord>& records);

/// Per-step exports of a detailed run.
std::string trajectory_csv(const RunResult& result);
std::string measurements_csv(const RunResult& result);

}  // namespace skfnav
