#include <cmath>
#include <sstream>

#include "skfnav/errors.hpp"
#include "skfnav/io.hpp"
#include "skfnav/scenarios.hpp"

namespace skfnav {

using nav::ImuSample;
using nav::NavState15;
using nav::Vec3;

namespace {

const std::set<std::string>& case_keys() {
  static const std::set<std::string> keys = {"scenario", "name", "description",
                                             "branches", "expect_outcome"};
  return keys;
}

// value and first derivative of sum_i c_i t^(i+1)
std::pair<double, double> poly_offset(const std::vector<double>& c, double t) {
  double value = 0.0, rate = 0.0, tp = 1.0;  // tp = t^i
  for (std::size_t i = 0; i < c.size(); ++i) {
    rate += static_cast<double>(i + 1) * c[i] * tp;
    tp *= t;
    value += c[i] * tp;
  }
  return {value, rate};
}

Vec3 vec3_from_json(const nlohmann::json& j, const std::string& what) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError(what + " must have 3 entries");
  return {v[0], v[1], v[2]};
}

}  // namespace

NoiseScaling noise_scaling_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scaling must be a JSON object");
  NoiseScaling s;
  std::set<std::string> known(kShuttleNavStates.begin(), kShuttleNavStates.end());
  io::check_keys(j, known, "scaling");
  for (std::size_t i = 0; i < kShuttleNavStates.size(); ++i) {
    const char* name = kShuttleNavStates[i];
    if (!j.contains(name)) {
      throw ConfigError(std::string("missing scaling factor '") + name + "'");
    }
    const double f = j.at(name).get<double>();
    if (!(f > 0.0)) {
      throw ConfigError(std::string("scaling factor '") + name + "' must be > 0");
    }
    s.factors[i] = f;
  }
  return s;
}

ScaledNoise scale_noise(double q_x, double r, const NoiseScaling& scaling) {
  if (q_x < 0.0 || r < 0.0) throw ConfigError("noise variances must be >= 0");
  ScaledNoise out;
  out.process = Vector(9);
  out.measurement = Vector(3);
  for (int i = 0; i < 9; ++i) {
    if (!(scaling.factors[i] > 0.0)) throw ConfigError("scaling factors must be > 0");
    out.process(i) = q_x * scaling.factors[i];
  }
  for (int i = 0; i < 3; ++i) out.measurement(i) = r * scaling.factors[i];
  return out;
}

ImuSample ShuttleProfile::imu_at(const NavState15& x0, double t) const {
  const double vh0 = x0.v * std::cos(x0.gamma);
  const double vd0 = -x0.v * std::sin(x0.gamma);
  const double vh = vh0 - horizontal_decel * t;
  const double chi = x0.alpha + heading_rate * t;
  const double h = x0.h - vd0 * t - 0.5 * down_accel * t * t;

  const Vec3 accel{-horizontal_decel * std::cos(chi) - vh * heading_rate * std::sin(chi),
                   -horizontal_decel * std::sin(chi) + vh * heading_rate * std::cos(chi),
                   down_accel};
  const Vec3 f_i = accel - nav::gravity(h);

  const auto [droll, roll_rate] = poly_offset(roll, t);
  const auto [dpitch, pitch_rate] = poly_offset(pitch, t);
  const auto [dyaw, yaw_rate] = poly_offset(yaw, t);
  const double phi = x0.phi + droll;
  const double theta = x0.theta + dpitch;
  const double psi = x0.psi + heading_rate * t + dyaw;

  NavState15 att;
  att.phi = phi;
  att.theta = theta;
  // euler_rates(att, w) = E w with zero gyro bias; invert by probing columns.
  nav::Mat3 e;
  for (int c = 0; c < 3; ++c) e.col(c) = nav::euler_rates(att, Vec3::Unit(c));
  const Vec3 rates{roll_rate, pitch_rate, heading_rate + yaw_rate};

  ImuSample s;
  s.angular_rate = e.partialPivLu().solve(rates);
  s.specific_force = nav::attitude_matrix(phi, theta, psi).transpose() * f_i;
  return s;
}

NavState15 ShuttleConfig::default_initial_state() {
  NavState15 s;
  s.h = 1.5e5;
  s.L = 0.93;
  s.lambda = 0.32;
  s.v = 1.4e4;
  s.gamma = -0.01;
  s.alpha = 0.8;
  s.phi = 0.6;
  s.theta = 0.2;
  s.psi = 0.65;
  return s;
}

void ShuttleConfig::validate() const {
  if (steps <= 0) throw ConfigError("steps must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (delta < 1) throw ConfigError("delta must be >= 1");
  if (q_x < 0.0 || q_p < 0.0 || r < 0.0) {
    throw ConfigError("noise variances must be non-negative");
  }
  if (substeps < 1) throw ConfigError("reference substeps must be >= 1");
  if (reference_source != "generator" && reference_source != "file") {
    throw ConfigError("reference source must be 'generator' or 'file'");
  }
  if (reference_source == "file" && reference_path.empty()) {
    throw ConfigError("file reference needs a path");
  }
  if (bias.channels.size() != 3) throw ConfigError("shuttle bias needs 3 channels");
  bias.validate();
  if (corrupted && true_switch < 0.0) throw ConfigError("true_switch must be >= 0");
  for (double f : scaling.factors) {
    if (!(f > 0.0)) throw ConfigError("scaling factors must be > 0");
  }
  const auto& i = imu;
  if (i.accel_noise_var < 0 || i.gyro_noise_var < 0 || i.accel_bias_rw_var < 0 ||
      i.gyro_bias_rw_var < 0) {
    throw ConfigError("IMU variances must be non-negative");
  }
  const auto& f = filter;
  if (!(f.position_var > 0 && f.velocity_var > 0 && f.attitude_var > 0 &&
        f.accel_bias_var > 0 && f.gyro_bias_var > 0) ||
      f.theta_var < 0) {
    throw ConfigError("filter initial variances must be positive");
  }
}

ShuttleConfig shuttle_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir) {
  std::set<std::string> known = {"steps", "dt", "delta", "true_switch",
                                 "true_switch_step", "bias", "q_x", "q_p", "r",
                                 "scaling", "initial", "reference", "imu",
                                 "filter", "seed"};
  known.insert(case_keys().begin(), case_keys().end());
  io::check_keys(j, known, "shuttle config");

  ShuttleConfig c;
  c.steps = j.value("steps", c.steps);
  c.dt = j.value("dt", c.dt);
  c.delta = j.value("delta", c.delta);
  if (j.contains("true_switch") && j.contains("true_switch_step")) {
    throw ConfigError("give either true_switch or true_switch_step, not both");
  }
  if (j.contains("true_switch_step")) {
    const auto& s = j.at("true_switch_step");
    c.corrupted = !s.is_null();
    if (c.corrupted) c.true_switch = static_cast<double>(s.get<long>()) * c.dt;
  } else if (j.contains("true_switch")) {
    const auto& s = j.at("true_switch");
    c.corrupted = !s.is_null();
    if (c.corrupted) c.true_switch = s.get<double>();
  }
  if (j.contains("bias")) {
    nlohmann::json b = j.at("bias");
    if (!b.contains("cap")) b["cap"] = 1000.0;
    c.bias = bias_spec_from_json(b, 3);
  }
  c.q_x = j.value("q_x", c.q_x);
  c.q_p = j.value("q_p", c.q_p);
  c.r = j.value("r", c.r);
  if (j.contains("scaling")) c.scaling = noise_scaling_from_json(j.at("scaling"));
  if (j.contains("initial")) {
    const auto& s = j.at("initial");
    io::check_keys(s, {"h", "L", "lambda", "v", "gamma", "alpha", "phi", "theta",
                       "psi", "accel_bias", "gyro_bias"},
                   "initial state");
    auto& x = c.initial;
    x.h = s.value("h", x.h);
    x.L = s.value("L", x.L);
    x.lambda = s.value("lambda", x.lambda);
    x.v = s.value("v", x.v);
    x.gamma = s.value("gamma", x.gamma);
    x.alpha = s.value("alpha", x.alpha);
    x.phi = s.value("phi", x.phi);
    x.theta = s.value("theta", x.theta);
    x.psi = s.value("psi", x.psi);
    if (s.contains("accel_bias")) x.accel_bias = vec3_from_json(s.at("accel_bias"), "accel_bias");
    if (s.contains("gyro_bias")) x.gyro_bias = vec3_from_json(s.at("gyro_bias"), "gyro_bias");
  }
  if (j.contains("reference")) {
    const auto& r = j.at("reference");
    io::check_keys(r, {"source", "path", "substeps", "profile"}, "reference");
    c.reference_source = r.value("source", c.reference_source);
    if (r.contains("path")) {
      std::filesystem::path p = r.at("path").get<std::string>();
      c.reference_path = p.is_relative() ? base_dir / p : p;
    }
    c.substeps = r.value("substeps", c.substeps);
    if (r.contains("profile")) {
      const auto& p = r.at("profile");
      io::check_keys(p, {"horizontal_decel", "heading_rate", "down_accel", "roll",
                         "pitch", "yaw"},
                     "reference profile");
      auto& pr = c.profile;
      pr.horizontal_decel = p.value("horizontal_decel", pr.horizontal_decel);
      pr.heading_rate = p.value("heading_rate", pr.heading_rate);
      pr.down_accel = p.value("down_accel", pr.down_accel);
      if (p.contains("roll")) pr.roll = p.at("roll").get<std::vector<double>>();
      if (p.contains("pitch")) pr.pitch = p.at("pitch").get<std::vector<double>>();
      if (p.contains("yaw")) pr.yaw = p.at("yaw").get<std::vector<double>>();
    }
  }
  if (j.contains("imu")) {
    const auto& m = j.at("imu");
    io::check_keys(m, {"accel_noise_var", "gyro_noise_var", "accel_bias_rw_var",
                       "gyro_bias_rw_var"},
                   "imu");
    auto& i = c.imu;
    i.accel_noise_var = m.value("accel_noise_var", i.accel_noise_var);
    i.gyro_noise_var = m.value("gyro_noise_var", i.gyro_noise_var);
    i.accel_bias_rw_var = m.value("accel_bias_rw_var", i.accel_bias_rw_var);
    i.gyro_bias_rw_var = m.value("gyro_bias_rw_var", i.gyro_bias_rw_var);
  }
  if (j.contains("filter")) {
    const auto& m = j.at("filter");
    io::check_keys(m, {"position_var", "velocity_var", "attitude_var",
                       "accel_bias_var", "gyro_bias_var", "theta_var"},
                   "filter");
    auto& f = c.filter;
    f.position_var = m.value("position_var", f.position_var);
    f.velocity_var = m.value("velocity_var", f.velocity_var);
    f.attitude_var = m.value("attitude_var", f.attitude_var);
    f.accel_bias_var = m.value("accel_bias_var", f.accel_bias_var);
    f.gyro_bias_var = m.value("gyro_bias_var", f.gyro_bias_var);
    f.theta_var = m.value("theta_var", f.theta_var);
  }
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json to_json(const ShuttleConfig& c) {
  nlohmann::json j;
  j["steps"] = c.steps;
  j["dt"] = c.dt;
  j["delta"] = c.delta;
  j["true_switch"] = c.corrupted ? nlohmann::json(c.true_switch) : nlohmann::json();
  j["bias"] = c.bias;
  j["q_x"] = c.q_x;
  j["q_p"] = c.q_p;
  j["r"] = c.r;
  nlohmann::json scaling;
  for (std::size_t i = 0; i < kShuttleNavStates.size(); ++i) {
    scaling[kShuttleNavStates[i]] = c.scaling.factors[i];
  }
  j["scaling"] = scaling;
  const auto& x = c.initial;
  j["initial"] = {{"h", x.h},         {"L", x.L},         {"lambda", x.lambda},
                  {"v", x.v},         {"gamma", x.gamma}, {"alpha", x.alpha},
                  {"phi", x.phi},     {"theta", x.theta}, {"psi", x.psi},
                  {"accel_bias", {x.accel_bias(0), x.accel_bias(1), x.accel_bias(2)}},
                  {"gyro_bias", {x.gyro_bias(0), x.gyro_bias(1), x.gyro_bias(2)}}};
  nlohmann::json ref = {{"source", c.reference_source}, {"substeps", c.substeps}};
  if (c.reference_source == "file") ref["path"] = c.reference_path.string();
  ref["profile"] = {{"horizontal_decel", c.profile.horizontal_decel},
                    {"heading_rate", c.profile.heading_rate},
                    {"down_accel", c.profile.down_accel},
                    {"roll", c.profile.roll},
                    {"pitch", c.profile.pitch},
                    {"yaw", c.profile.yaw}};
  j["reference"] = ref;
  j["imu"] = {{"accel_noise_var", c.imu.accel_noise_var},
              {"gyro_noise_var", c.imu.gyro_noise_var},
              {"accel_bias_rw_var", c.imu.accel_bias_rw_var},
              {"gyro_bias_rw_var", c.imu.gyro_bias_rw_var}};
  j["filter"] = {{"position_var", c.filter.position_var},
                 {"velocity_var", c.filter.velocity_var},
                 {"attitude_var", c.filter.attitude_var},
                 {"accel_bias_var", c.filter.accel_bias_var},
                 {"gyro_bias_var", c.filter.gyro_bias_var},
                 {"theta_var", c.filter.theta_var}};
  j["seed"] = c.seed;
  return j;
}

ReferenceTrajectory generate_reference(const ShuttleProfile& profile,
                                       const NavState15& x0, double dt,
                                       long steps, int substeps) {
  if (steps < 0 || substeps < 1 || !(dt > 0.0)) {
    throw ContractError("invalid reference grid");
  }
  ReferenceTrajectory ref;
  ref.times.reserve(static_cast<std::size_t>(steps) + 1);
  ref.states.reserve(static_cast<std::size_t>(steps) + 1);
  NavState15 s = x0;
  const double h = dt / substeps;
  for (long k = 0; k <= steps; ++k) {
    const double t_k = static_cast<double>(k) * dt;
    ref.times.push_back(t_k);
    ref.states.push_back(s);
    ref.imu.push_back(profile.imu_at(x0, t_k));
    if (k == steps) break;
    for (int j = 0; j < substeps; ++j) {
      const ImuSample sample =
          j == 0 ? ref.imu.back() : profile.imu_at(x0, t_k + j * h);
      s = nav::strapdown_step(s, sample, h);
    }
  }
  return ref;
}

std::vector<NavState15> integrate_imu(const NavState15& x0,
                                      const std::vector<ImuSample>& imu,
                                      double dt, long steps) {
  if (static_cast<long>(imu.size()) < steps) {
    throw ContractError("IMU stream shorter than requested steps");
  }
  std::vector<NavState15> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(x0);
  for (long k = 0; k < steps; ++k) {
    out.push_back(nav::strapdown_step(out.back(), imu[static_cast<std::size_t>(k)], dt));
  }
  return out;
}

std::vector<ImuSample> imu_from_states(const std::vector<NavState15>& states,
                                       double dt) {
  std::vector<ImuSample> out;
  for (std::size_t k = 0; k + 1 < states.size(); ++k) {
    out.push_back(nav::imu_between(states[k], states[k + 1], dt));
  }
  return out;
}

std::string reference_csv(const ReferenceTrajectory& ref) {
  std::ostringstream out;
  out << "t,f_b_x,f_b_y,f_b_z,omega_x,omega_y,omega_z,h,L,lambda,v,gamma,alpha,"
         "phi,theta,psi\n";
  for (std::size_t k = 0; k < ref.times.size(); ++k) {
    const auto& s = ref.states[k];
    const auto& m = ref.imu.at(k);
    std::vector<double> row = {ref.times[k],        m.specific_force(0),
                               m.specific_force(1), m.specific_force(2),
                               m.angular_rate(0),   m.angular_rate(1),
                               m.angular_rate(2),   s.h,
                               s.L,                 s.lambda,
                               s.v,                 s.gamma,
                               s.alpha,             s.phi,
                               s.theta,             s.psi};
    std::vector<std::string> fields;
    for (double v : row) fields.push_back(io::format_double(v));
    out << io::join(fields) << '\n';
  }
  return out.str();
}

ReferenceTrajectory parse_reference_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty reference file");
  const std::vector<std::string> expected = {
      "t",     "f_b_x", "f_b_y", "f_b_z", "omega_x", "omega_y",
      "omega_z", "h",   "L",     "lambda", "v",      "gamma",
      "alpha", "phi",   "theta", "psi"};
  if (io::split_csv_line(line) != expected) {
    throw ConfigError("reference header must be " + io::join(expected));
  }
  ReferenceTrajectory ref;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    const std::string ctx = "reference row " + std::to_string(row);
    if (f.size() != expected.size()) throw ConfigError(ctx + " has wrong column count");
    std::vector<double> v;
    for (const auto& field : f) {
      const double x = io::parse_double(field, ctx);
      if (!std::isfinite(x)) throw ConfigError(ctx + " has a non-finite value");
      v.push_back(x);
    }
    if (!ref.times.empty() && !(v[0] > ref.times.back())) {
      throw ConfigError(ctx + ": times must increase");
    }
    ref.times.push_back(v[0]);
    ImuSample m;
    m.specific_force = {v[1], v[2], v[3]};
    m.angular_rate = {v[4], v[5], v[6]};
    ref.imu.push_back(m);
    NavState15 s;
    s.h = v[7];
    s.L = v[8];
    s.lambda = v[9];
    s.v = v[10];
    s.gamma = v[11];
    s.alpha = v[12];
    s.phi = v[13];
    s.theta = v[14];
    s.psi = v[15];
    ref.states.push_back(s);
  }
  if (ref.times.size() < 2) throw ConfigError("reference needs at least two rows");
  return ref;
}

namespace {

ReferenceTrajectory load_reference(const ShuttleConfig& cfg) {
  if (cfg.reference_source == "generator") {
    return generate_reference(cfg.profile, cfg.initial, cfg.dt, cfg.steps,
                              cfg.substeps);
  }
  ReferenceTrajectory ref = parse_reference_csv(io::read_text_file(cfg.reference_path));
  if (static_cast<long>(ref.times.size()) < cfg.steps + 1) {
    throw ConfigError("reference file has fewer rows than steps + 1");
  }
  for (std::size_t k = 1; k < ref.times.size(); ++k) {
    const double step = ref.times[k] - ref.times[k - 1];
    if (std::abs(step - cfg.dt) > 1e-9 * std::max(1.0, cfg.dt)) {
      throw ConfigError("reference time step does not match dt");
    }
  }
  const auto n = static_cast<std::size_t>(cfg.steps) + 1;
  ref.times.resize(n);
  ref.states.resize(n);
  ref.imu.resize(n);
  return ref;
}

Vector position_of(const NavState15& s) {
  Vector p(3);
  p << s.h, s.L, s.lambda;
  return p;
}

}  // namespace

ShuttleRun simulate_shuttle(const ShuttleConfig& cfg) {
  cfg.validate();
  ShuttleRun run;
  run.reference = load_reference(cfg);
  const NavState15& x0 = run.reference.states.front();
  run.inertial = integrate_imu(x0, run.reference.imu, cfg.dt, cfg.steps);

  std::mt19937_64 imu_rng(io::mix_seed(cfg.seed, 3));
  nav::ImuNoise noise;
  noise.accel_cov = cfg.imu.accel_noise_var * nav::Mat3::Identity();
  noise.gyro_cov = cfg.imu.gyro_noise_var * nav::Mat3::Identity();
  const nav::Mat3 accel_rw = cfg.imu.accel_bias_rw_var * nav::Mat3::Identity();
  const nav::Mat3 gyro_rw = cfg.imu.gyro_bias_rw_var * nav::Mat3::Identity();
  Vec3 b_a = cfg.initial.accel_bias;
  Vec3 b_g = cfg.initial.gyro_bias;
  for (long k = 0; k < cfg.steps; ++k) {
    const auto& truth = run.reference.imu[static_cast<std::size_t>(k)];
    run.imu.push_back(nav::synthesize_imu(truth.specific_force, truth.angular_rate,
                                          b_a, b_g, noise, imu_rng));
    run.accel_bias.push_back(b_a);
    run.gyro_bias.push_back(b_g);
    nav::propagate_imu_bias(b_a, b_g, accel_rw, gyro_rw, imu_rng);
  }

  std::mt19937_64 gps_rng(io::mix_seed(cfg.seed, 4));
  std::normal_distribution<double> n01(0.0, 1.0);
  const ScaledNoise scaled = scale_noise(cfg.q_x, cfg.r, cfg.scaling);
  for (long k = cfg.delta; k <= cfg.steps; k += cfg.delta) {
    const double t_k = static_cast<double>(k) * cfg.dt;
    Observation obs;
    obs.step = k;
    obs.t = t_k;
    obs.noise = Vector(3);
    for (int c = 0; c < 3; ++c) {
      obs.noise(c) = std::sqrt(scaled.measurement(c)) * n01(gps_rng);
    }
    obs.bias = Vector::Zero(3);
    if (cfg.corrupted && bias_active(cfg.true_switch, t_k)) {
      obs.bias = bias_eval(cfg.bias, cfg.true_switch, t_k);
    }
    obs.y = position_of(run.reference.states[static_cast<std::size_t>(k)]) +
            obs.bias + obs.noise;
    run.observations.push_back(std::move(obs));
  }
  return run;
}

StateMap shuttle_filter_dynamics(const ImuSample& imu, double dt) {
  return [imu, dt](const Vector& x) {
    const NavState15 next = nav::strapdown_step(NavState15::from_vector(x), imu, dt);
    Vector out = x;
    out.head(nav::idx::size) = next.to_vector();
    return out;
  };
}

}  // namespace skfnav
