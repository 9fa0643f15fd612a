#include <algorithm>
#include <cmath>
#include <limits>

#include "skfnav/errors.hpp"
#include "skfnav/io.hpp"
#include "skfnav/scenarios.hpp"

namespace skfnav {

namespace {

// Keys owned by the case wrapper rather than the scenario itself.
const std::set<std::string>& case_keys() {
  static const std::set<std::string> keys = {"scenario", "name", "description",
                                             "branches", "expect_outcome"};
  return keys;
}

std::optional<double> switch_from_json(const nlohmann::json& j, double dt) {
  if (j.contains("true_switch") && j.contains("true_switch_step")) {
    throw ConfigError("give either true_switch or true_switch_step, not both");
  }
  if (j.contains("true_switch_step")) {
    const auto& s = j.at("true_switch_step");
    if (s.is_null()) return std::nullopt;
    return static_cast<double>(s.get<long>()) * dt;
  }
  if (j.contains("true_switch")) {
    const auto& s = j.at("true_switch");
    if (s.is_null()) return std::nullopt;
    return s.get<double>();
  }
  return std::nullopt;
}

}  // namespace

double noise_to_range_ratio(double r, const std::vector<Vector>& trajectory) {
  if (trajectory.empty()) throw ContractError("empty trajectory");
  if (r < 0.0) throw ContractError("negative noise variance");
  const Eigen::Index d = trajectory.front().size();
  double worst = 0.0;
  for (Eigen::Index c = 0; c < d; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& x : trajectory) {
      lo = std::min(lo, x(c));
      hi = std::max(hi, x(c));
    }
    const double range = hi - lo;
    if (!(range > 0.0)) throw DomainError("trajectory has zero range");
    worst = std::max(worst, 100.0 * 2.0 * std::sqrt(r) / range);
  }
  return worst;
}

void BalloonConfig::validate() const {
  if (steps <= 0) throw ConfigError("steps must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (delta < 1) throw ConfigError("delta must be >= 1");
  if (q_x < 0.0 || q_p < 0.0 || r < 0.0) {
    throw ConfigError("noise variances must be non-negative");
  }
  if (!(init_var > 0.0) || theta_var < 0.0) {
    throw ConfigError("initial variances must be positive");
  }
  if (bias.channels.size() != 2) throw ConfigError("balloon bias needs 2 channels");
  bias.validate();
  if (true_switch && *true_switch < 0.0) {
    throw ConfigError("true_switch must be non-negative");
  }
  if (field.kind == VelocityField::Kind::Gridded) field.grid.validate();
}

BalloonConfig balloon_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir) {
  std::set<std::string> known = {"steps", "dt",    "x0",    "q_x",
                                 "q_p",   "r",     "delta", "bias",
                                 "true_switch", "true_switch_step", "seed",
                                 "field", "init_var", "theta_var"};
  known.insert(case_keys().begin(), case_keys().end());
  io::check_keys(j, known, "balloon config");

  BalloonConfig c;
  c.steps = j.value("steps", c.steps);
  c.dt = j.value("dt", c.dt);
  if (j.contains("x0")) {
    const auto x0 = j.at("x0").get<std::vector<double>>();
    if (x0.size() != 2) throw ConfigError("x0 must be [lon, lat]");
    c.x0 = {x0[0], x0[1]};
  }
  c.q_x = j.value("q_x", c.q_x);
  c.q_p = j.value("q_p", c.q_p);
  c.r = j.value("r", c.r);
  c.delta = j.value("delta", c.delta);
  if (j.contains("bias")) c.bias = bias_spec_from_json(j.at("bias"), 2);
  c.true_switch = switch_from_json(j, c.dt);
  c.seed = j.value("seed", c.seed);
  if (j.contains("field")) c.field = velocity_field_from_json(j.at("field"), base_dir);
  c.init_var = j.value("init_var", c.init_var);
  c.theta_var = j.value("theta_var", c.theta_var);
  c.validate();
  return c;
}

nlohmann::json to_json(const BalloonConfig& c) {
  nlohmann::json j;
  j["steps"] = c.steps;
  j["dt"] = c.dt;
  j["x0"] = {c.x0(0), c.x0(1)};
  j["q_x"] = c.q_x;
  j["q_p"] = c.q_p;
  j["r"] = c.r;
  j["delta"] = c.delta;
  j["bias"] = c.bias;
  j["true_switch"] = c.true_switch ? nlohmann::json(*c.true_switch) : nlohmann::json();
  j["seed"] = c.seed;
  j["init_var"] = c.init_var;
  j["theta_var"] = c.theta_var;
  if (c.field.kind == VelocityField::Kind::Analytic) {
    const auto& a = c.field.analytic;
    j["field"] = {{"kind", "analytic"},   {"u0", a.u0},
                  {"v0", a.v0},           {"amp_u", a.amp_u},
                  {"amp_v", a.amp_v},     {"wavelength", a.wavelength},
                  {"omega", a.omega}};
  } else {
    j["field"] = {{"kind", "gridded"},
                  {"nodes", c.field.grid.u.size()}};
  }
  return j;
}

Vector balloon_dynamics(const VelocityField& field, const Vector& x, double t,
                        double dt) {
  const Eigen::Vector2d uv = field_eval(field, x(0), x(1), t);
  Vector out = x;
  out(0) += dt * uv(0);
  out(1) += dt * uv(1);
  return out;
}

BalloonRun simulate_balloon(const BalloonConfig& cfg) {
  cfg.validate();
  std::mt19937_64 process_rng(io::mix_seed(cfg.seed, 1));
  std::mt19937_64 measure_rng(io::mix_seed(cfg.seed, 2));
  std::normal_distribution<double> n01(0.0, 1.0);
  const double sq = std::sqrt(cfg.q_x);
  const double sr = std::sqrt(cfg.r);

  BalloonRun run;
  run.times.push_back(0.0);
  run.truth.push_back(cfg.x0);
  run.process_noise.push_back(Vector::Zero(2));

  for (long k = 1; k <= cfg.steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * cfg.dt;
    const double t_k = static_cast<double>(k) * cfg.dt;
    Vector xi(2);
    xi << sq * n01(process_rng), sq * n01(process_rng);
    run.truth.push_back(balloon_dynamics(cfg.field, run.truth.back(), t_prev, cfg.dt) + xi);
    run.times.push_back(t_k);
    run.process_noise.push_back(xi);

    if (k % cfg.delta != 0) continue;
    Observation obs;
    obs.step = k;
    obs.t = t_k;
    obs.noise = Vector(2);
    obs.noise << sr * n01(measure_rng), sr * n01(measure_rng);
    obs.bias = Vector::Zero(2);
    if (cfg.true_switch && bias_active(*cfg.true_switch, t_k)) {
      obs.bias = bias_eval(cfg.bias, *cfg.true_switch, t_k);
    }
    obs.y = run.truth.back() + obs.bias + obs.noise;
    run.observations.push_back(std::move(obs));
  }
  return run;
}

}  // namespace skfnav
