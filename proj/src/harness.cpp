#include "skfnav/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "skfnav/errors.hpp"
#include "skfnav/io.hpp"

namespace skfnav {

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Green: return "green";
    case Outcome::Yellow: return "yellow";
    case Outcome::Red: return "red";
  }
  return "red";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "green") return Outcome::Green;
  if (s == "yellow") return Outcome::Yellow;
  if (s == "red") return Outcome::Red;
  throw ConfigError("unknown outcome '" + s + "'");
}

std::string to_string(ScenarioKind s) {
  return s == ScenarioKind::Balloon ? "balloon" : "shuttle";
}

std::uint64_t CaseConfig::seed() const {
  return scenario == ScenarioKind::Balloon ? balloon.seed : shuttle.seed;
}
void CaseConfig::set_seed(std::uint64_t seed) {
  balloon.seed = seed;
  shuttle.seed = seed;
}
double CaseConfig::dt() const {
  return scenario == ScenarioKind::Balloon ? balloon.dt : shuttle.dt;
}
long CaseConfig::steps() const {
  return scenario == ScenarioKind::Balloon ? balloon.steps : shuttle.steps;
}
int CaseConfig::delta() const {
  return scenario == ScenarioKind::Balloon ? balloon.delta : shuttle.delta;
}
std::optional<double> CaseConfig::true_switch() const {
  if (scenario == ScenarioKind::Balloon) return balloon.true_switch;
  if (!shuttle.corrupted) return std::nullopt;
  return shuttle.true_switch;
}
const BiasSpec& CaseConfig::bias() const {
  return scenario == ScenarioKind::Balloon ? balloon.bias : shuttle.bias;
}
bool CaseConfig::bias_zero() const { return bias().is_zero(); }
double CaseConfig::q_x() const {
  return scenario == ScenarioKind::Balloon ? balloon.q_x : shuttle.q_x;
}
double CaseConfig::q_p() const {
  return scenario == ScenarioKind::Balloon ? balloon.q_p : shuttle.q_p;
}
double CaseConfig::r() const {
  return scenario == ScenarioKind::Balloon ? balloon.r : shuttle.r;
}

std::string CaseConfig::config_hash() const {
  nlohmann::json j = source;
  j.erase("seed");
  return io::fnv1a_hex(j.dump());
}

CaseConfig case_config_from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir,
                                 const std::string& fallback_name) {
  if (!j.is_object()) throw ConfigError("case config must be a JSON object");
  CaseConfig c;
  try {
    c.name = j.value("name", fallback_name);
    const std::string scenario = j.value("scenario", std::string("balloon"));
    c.branches = j.value("branches", c.branches);
    if (c.branches < 2) throw ConfigError("branches must be at least 2");
    if (j.contains("expect_outcome") && !j.at("expect_outcome").is_null()) {
      c.expect_outcome = outcome_from_string(j.at("expect_outcome").get<std::string>());
    }
    if (scenario == "balloon") {
      c.scenario = ScenarioKind::Balloon;
      c.balloon = balloon_config_from_json(j, base_dir);
    } else if (scenario == "shuttle") {
      c.scenario = ScenarioKind::Shuttle;
      c.shuttle = shuttle_config_from_json(j, base_dir);
    } else {
      throw ConfigError("unknown scenario '" + scenario + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.source = j;
  return c;
}

CaseConfig load_case_config(const std::filesystem::path& path) {
  const nlohmann::json j = io::read_json_file(path);
  return case_config_from_json(j, path.parent_path(), path.stem().string());
}

Vector rmse(const std::vector<Vector>& estimate, const std::vector<Vector>& truth) {
  if (estimate.size() != truth.size()) {
    throw ContractError("rmse needs series of equal length");
  }
  if (truth.empty()) throw ContractError("rmse needs a non-empty series");
  const Eigen::Index d = truth.front().size();
  Vector num = Vector::Zero(d);
  Vector den = Vector::Zero(d);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (estimate[k].size() != d || truth[k].size() != d) {
      throw ContractError("rmse series change dimension");
    }
    num += (estimate[k] - truth[k]).cwiseAbs2();
    den += truth[k].cwiseAbs2();
  }
  Vector out(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    out(i) = den(i) > 0.0 ? std::sqrt(num(i) / den(i))
                          : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

Outcome classify(std::optional<double> estimated, std::optional<double> true_switch,
                 long n_steps, double dt, bool bias_zero) {
  constexpr double tol = 1e-9;
  if (bias_zero || !true_switch) {
    if (!estimated) return Outcome::Green;
    const double t_end = static_cast<double>(n_steps) * dt;
    return *estimated >= 0.95 * t_end - tol * t_end ? Outcome::Green : Outcome::Red;
  }
  if (!estimated) return Outcome::Red;
  const double steps_off = std::abs(*estimated - *true_switch) / dt;
  if (steps_off <= 1.0 + tol) return Outcome::Green;
  if (steps_off <= 10.0 + tol) return Outcome::Yellow;
  return Outcome::Red;
}

double RunRecord::axis_value(const std::string& axis) const {
  if (axis == "q_x") return q_x;
  if (axis == "q_p") return q_p;
  if (axis == "r") return r;
  if (axis == "A") return bias.A;
  if (axis == "B") return bias.B;
  if (axis == "C") return bias.C;
  if (axis == "delta") return delta;
  throw ConfigError("unknown sweep axis '" + axis + "'");
}

namespace {

// Setup shared by both scenarios once the model pieces are known.
struct FilterProblem {
  Vector x0;
  Matrix C0;
  double theta_var = 1.0;
  QuadraticBiasLayout layout;
  Matrix Q_aug;
  Matrix R;
  long steps = 0;
  std::function<StateMap(long k)> dynamics_at;  // map into step k
  std::vector<std::optional<Vector>> y;         // index k, 0..steps
};

BranchSet run_filter(const FilterProblem& p, const SwitchingFilterConfig& config,
                     const StepHooks* hooks) {
  BranchSet set = init(p.x0, p.C0, p.layout.theta_dim(), config, p.theta_var);
  StepModel model;
  model.Q_aug = p.Q_aug;
  model.layout = &p.layout;
  model.R = p.R;
  for (long k = 1; k <= p.steps; ++k) {
    model.dynamics = p.dynamics_at(k);
    set = step(std::move(set), k, p.y[static_cast<std::size_t>(k)], model, config, hooks);
  }
  return set;
}

std::vector<std::optional<Vector>> measurement_slots(
    const std::vector<Observation>& obs, long steps) {
  std::vector<std::optional<Vector>> y(static_cast<std::size_t>(steps) + 1);
  for (const auto& o : obs) y[static_cast<std::size_t>(o.step)] = o.y;
  return y;
}

FilterProblem balloon_problem(const BalloonConfig& cfg, const BalloonRun& run) {
  FilterProblem p;
  p.x0 = cfg.x0;
  p.C0 = cfg.init_var * Matrix::Identity(2, 2);
  p.theta_var = cfg.theta_var;
  p.layout = QuadraticBiasLayout::shared({0, 1}, 2);
  p.layout.cap = cfg.bias.cap;
  p.Q_aug = augment(p.x0, Vector::Zero(3), cfg.q_x * Matrix::Identity(2, 2), cfg.q_p).Q;
  p.R = cfg.r * Matrix::Identity(2, 2);
  p.steps = cfg.steps;
  const VelocityField field = cfg.field;
  const double dt = cfg.dt;
  p.dynamics_at = [field, dt](long k) {
    const double t_prev = static_cast<double>(k - 1) * dt;
    return augment_dynamics(
        [field, t_prev, dt](const Vector& x) {
          return balloon_dynamics(field, x, t_prev, dt);
        },
        2);
  };
  p.y = measurement_slots(run.observations, cfg.steps);
  return p;
}

FilterProblem shuttle_problem(const ShuttleConfig& cfg, const ShuttleRun& run) {
  namespace idx = nav::idx;
  FilterProblem p;
  nav::NavState15 x0 = run.reference.states.front();
  x0.accel_bias = cfg.initial.accel_bias;
  x0.gyro_bias = cfg.initial.gyro_bias;
  p.x0 = x0.to_vector();

  Vector c0(idx::size);
  const auto& f = cfg.filter;
  c0 << f.position_var, f.position_var, f.position_var, f.velocity_var,
      f.velocity_var, f.velocity_var, f.attitude_var, f.attitude_var,
      f.attitude_var, Vector::Constant(3, f.accel_bias_var),
      Vector::Constant(3, f.gyro_bias_var);
  p.C0 = c0.asDiagonal();
  p.theta_var = f.theta_var;
  p.layout = QuadraticBiasLayout::per_channel({idx::h, idx::L, idx::lambda}, idx::size);
  p.layout.cap = cfg.bias.cap;

  const ScaledNoise scaled = scale_noise(cfg.q_x, cfg.r, cfg.scaling);
  Vector q(idx::size);
  q << scaled.process, Vector::Constant(3, cfg.imu.accel_bias_rw_var),
      Vector::Constant(3, cfg.imu.gyro_bias_rw_var);
  p.Q_aug = augment(p.x0, Vector::Zero(p.layout.theta_dim()), Matrix(q.asDiagonal()),
                    cfg.q_p)
                .Q;
  p.R = scaled.measurement.asDiagonal();
  p.steps = cfg.steps;
  const auto* imu = &run.imu;
  const double dt = cfg.dt;
  p.dynamics_at = [imu, dt](long k) {
    return shuttle_filter_dynamics((*imu)[static_cast<std::size_t>(k - 1)], dt);
  };
  p.y = measurement_slots(run.observations, cfg.steps);
  return p;
}

void fill_metrics(RunResult& result, const BranchSet& set, const Vector& x0,
                  const std::vector<Vector>& truth, Eigen::Index state_dim) {
  RunRecord& rec = result.record;
  const Estimate est = estimate(set);
  rec.estimated_switch = est.switch_time;
  if (rec.estimated_switch && rec.true_switch) {
    rec.delta_steps = std::abs(*rec.estimated_switch - *rec.true_switch) / rec.dt;
  }
  const Branch& best = best_branch(set, est);
  std::vector<Vector> estimate_series;
  estimate_series.push_back(x0.head(state_dim));
  for (std::size_t i = 0; i < best.history.size(); ++i) {
    estimate_series.push_back(best.history.mean_at(i).head(state_dim));
  }
  if (estimate_series.size() != truth.size()) {
    throw ContractError("estimate and truth series differ in length");
  }
  // Step 0 is the known initial condition and is left out of the score.
  const std::vector<Vector> est_tail(estimate_series.begin() + 1, estimate_series.end());
  const std::vector<Vector> truth_tail(truth.begin() + 1, truth.end());
  const Vector e = rmse(est_tail, truth_tail);
  rec.rmse.assign(e.data(), e.data() + e.size());
  if (result.times.empty()) return;
  result.truth = truth;
  result.estimate = std::move(estimate_series);
  result.branches = set;
}

}  // namespace

RunResult run_case(const CaseConfig& cfg_in, std::uint64_t seed,
                   const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  CaseConfig cfg = cfg_in;
  cfg.set_seed(seed);

  RunResult result;
  RunRecord& rec = result.record;
  rec.name = cfg.name;
  rec.scenario = cfg.scenario;
  rec.config_hash = cfg.config_hash();
  rec.seed = seed;
  rec.q_x = cfg.q_x();
  rec.q_p = cfg.q_p();
  rec.r = cfg.r();
  rec.delta = cfg.delta();
  rec.bias = cfg.bias().channels.empty() ? BiasCoeffs{} : cfg.bias().channels.front();
  rec.dt = cfg.dt();
  rec.steps = cfg.steps();
  rec.true_switch = cfg.bias_zero() ? std::nullopt : cfg.true_switch();
  if (cfg.scenario == ScenarioKind::Balloon) {
    rec.state_names = {"lon", "lat"};
  } else {
    rec.state_names.assign(kShuttleNavStates.begin(), kShuttleNavStates.end());
  }
  rec.rmse.assign(rec.state_names.size(), std::numeric_limits<double>::quiet_NaN());

  SwitchingFilterConfig fc;
  fc.capacity = cfg.branches;
  fc.dt = cfg.dt();
  fc.delta = cfg.delta();
  fc.history = HistoryMode::Full;

  try {
    if (cfg.scenario == ScenarioKind::Balloon) {
      const BalloonRun run = simulate_balloon(cfg.balloon);
      const FilterProblem p = balloon_problem(cfg.balloon, run);
      if (options.keep_details) {
        result.times = run.times;
        result.observations = run.observations;
      }
      const BranchSet set = run_filter(p, fc, options.hooks);
      fill_metrics(result, set, p.x0, run.truth, 2);
    } else {
      const ShuttleRun run = simulate_shuttle(cfg.shuttle);
      const FilterProblem p = shuttle_problem(cfg.shuttle, run);
      if (options.keep_details) {
        result.times = run.reference.times;
        result.observations = run.observations;
      }
      const BranchSet set = run_filter(p, fc, options.hooks);
      std::vector<Vector> truth;
      for (const auto& s : run.inertial) truth.push_back(s.to_vector().head(9));
      fill_metrics(result, set, p.x0, truth, 9);
    }
    rec.outcome = classify(rec.estimated_switch, rec.true_switch, rec.steps, rec.dt,
                           cfg.bias_zero());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
    rec.outcome = Outcome::Red;
    rec.estimated_switch.reset();
    rec.delta_steps.reset();
    rec.rmse.assign(rec.state_names.size(), std::numeric_limits<double>::quiet_NaN());
  }
  rec.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void sort_records(std::vector<RunRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const RunRecord& a, const RunRecord& b) {
                     if (a.name != b.name) return a.name < b.name;
                     if (a.config_hash != b.config_hash) return a.config_hash < b.config_hash;
                     return a.seed < b.seed;
                   });
}

namespace {

std::string opt(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string("none");
}

// Commas would break our plain CSV; error text is free-form.
std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string records_csv(const std::vector<RunRecord>& records) {
  std::vector<std::string> names;
  if (!records.empty()) names = records.front().state_names;
  std::vector<std::string> header = {
      "case",  "scenario", "seed", "config_hash", "q_x", "q_p", "r",
      "delta", "A",        "B",    "C",           "true_switch",
      "estimated_switch",  "delta_steps", "outcome", "success", "status"};
  for (const auto& n : names) header.push_back("rmse_" + n);
  std::ostringstream out;
  out << io::join(header) << '\n';
  for (const auto& r : records) {
    if (r.state_names != names) {
      throw ContractError("records mix scenarios with different states");
    }
    std::vector<std::string> row = {r.name,
                                    to_string(r.scenario),
                                    std::to_string(r.seed),
                                    r.config_hash,
                                    io::format_double(r.q_x),
                                    io::format_double(r.q_p),
                                    io::format_double(r.r),
                                    std::to_string(r.delta),
                                    io::format_double(r.bias.A),
                                    io::format_double(r.bias.B),
                                    io::format_double(r.bias.C),
                                    opt(r.true_switch),
                                    opt(r.estimated_switch),
                                    opt(r.delta_steps),
                                    to_string(r.outcome),
                                    r.success() ? "1" : "0",
                                    r.ok ? "ok" : "failed: " + sanitize(r.error)};
    for (double v : r.rmse) row.push_back(io::format_double(v));
    out << io::join(row) << '\n';
  }
  return out.str();
}

std::string timings_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "case,seed,config_hash,runtime_s\n";
  for (const auto& r : records) {
    out << io::join({r.name, std::to_string(r.seed), r.config_hash,
                     io::format_double(r.runtime_s)})
        << '\n';
  }
  return out.str();
}

std::string trajectory_csv(const RunResult& result) {
  const auto& names = result.record.state_names;
  std::vector<std::string> header = {"step", "time"};
  for (const auto& n : names) header.push_back("true_" + n);
  for (const auto& n : names) header.push_back("est_" + n);
  std::ostringstream out;
  out << io::join(header) << '\n';
  for (std::size_t k = 0; k < result.truth.size(); ++k) {
    std::vector<std::string> row = {std::to_string(k), io::format_double(result.times[k])};
    for (Eigen::Index i = 0; i < result.truth[k].size(); ++i) {
      row.push_back(io::format_double(result.truth[k](i)));
    }
    for (Eigen::Index i = 0; i < result.estimate[k].size(); ++i) {
      row.push_back(io::format_double(result.estimate[k](i)));
    }
    out << io::join(row) << '\n';
  }
  return out.str();
}

std::string measurements_csv(const RunResult& result) {
  std::ostringstream out;
  if (result.observations.empty()) return "step,time\n";
  const Eigen::Index d = result.observations.front().y.size();
  std::vector<std::string> header = {"step", "time"};
  for (Eigen::Index i = 0; i < d; ++i) header.push_back("y" + std::to_string(i));
  for (Eigen::Index i = 0; i < d; ++i) header.push_back("bias" + std::to_string(i));
  for (Eigen::Index i = 0; i < d; ++i) header.push_back("noise" + std::to_string(i));
  out << io::join(header) << '\n';
  for (const auto& o : result.observations) {
    std::vector<std::string> row = {std::to_string(o.step), io::format_double(o.t)};
    for (Eigen::Index i = 0; i < d; ++i) row.push_back(io::format_double(o.y(i)));
    for (Eigen::Index i = 0; i < d; ++i) row.push_back(io::format_double(o.bias(i)));
    for (Eigen::Index i = 0; i < d; ++i) row.push_back(io::format_double(o.noise(i)));
    out << io::join(row) << '\n';
  }
  return out.str();
}

}  // namespace skfnav
