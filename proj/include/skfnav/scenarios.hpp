#pragma once

// Truth and measurement generation for the drifting balloon and the
// GPS-aided shuttle reentry.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "skfnav/bias_models.hpp"
#include "skfnav/gaussian_filter.hpp"
#include "skfnav/inertial_nav.hpp"

namespace skfnav {

// ---------------------------------------------------------------- fields

/// u = u0 + amp_u sin(2 pi lat / wavelength + omega t)
/// v = v0 + amp_v cos(2 pi lon / wavelength + omega t)
/// Degrees per hour, t in hours.
struct AnalyticField {
  double u0 = 0.3;
  double v0 = 0.16;
  double amp_u = 0.1;
  double amp_v = 0.05;
  double wavelength = 10.0;  // degrees
  double omega = 0.5;        // rad / hour
};

/// Samples on a lon x lat x t lattice; values indexed [t][lat][lon].
struct GriddedField {
  std::vector<double> lon;
  std::vector<double> lat;
  std::vector<double> time;
  std::vector<double> u;
  std::vector<double> v;

  [[nodiscard]] std::size_t index(std::size_t it, std::size_t ilat,
                                  std::size_t ilon) const {
    return (it * lat.size() + ilat) * lon.size() + ilon;
  }
  void validate() const;
};

struct VelocityField {
  enum class Kind { Analytic, Gridded };
  Kind kind = Kind::Analytic;
  AnalyticField analytic;
  GriddedField grid;

  static VelocityField constant(double u0, double v0);
};

/// (u, v) at (lon, lat, t). Gridded fields interpolate bilinearly in space
/// and linearly in time; queries outside the lattice throw DomainError.
Eigen::Vector2d field_eval(const VelocityField& field, double lon, double lat,
                           double t);

/// CSV with header lon,lat,t,u,v; one row per lattice node in any order.
GriddedField parse_gridded_field_csv(const std::string& text);
GriddedField load_gridded_field_csv(const std::filesystem::path& path);

/// {"kind": "analytic", ...parameters} or {"kind": "gridded", "path": ...}.
/// Relative paths resolve against `base_dir`.
VelocityField velocity_field_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir);

// -------------------------------------------------------- measurements

struct Observation {
  long step = 0;
  double t = 0.0;
  Vector y;
  Vector noise;  // drawn measurement noise
  Vector bias;   // injected corruption
};

/// 2 sqrt(r) over the range of each channel, in percent, worst channel.
/// Throws DomainError on a zero-range channel.
double noise_to_range_ratio(double r, const std::vector<Vector>& trajectory);

// ------------------------------------------------------------- balloon

struct BalloonConfig {
  Eigen::Vector2d x0{-35.0, 25.0};
  long steps = 500;
  double dt = 0.01;  // hours
  double q_x = 1e-6;
  double q_p = 1e-6;
  double r = 1e-6;
  int delta = 1;
  BiasSpec bias = BiasSpec::uniform(BiasKind::Quadratic, {}, 2);
  std::optional<double> true_switch;  // hours; none means never corrupted
  std::uint64_t seed = 0;
  VelocityField field;
  double init_var = 1.0;
  double theta_var = 1.0;

  void validate() const;
};

BalloonConfig balloon_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir);
nlohmann::json to_json(const BalloonConfig& cfg);

struct BalloonRun {
  std::vector<double> times;    // steps + 1 entries
  std::vector<Vector> truth;    // (lon, lat) per step
  std::vector<Vector> process_noise;  // draw applied on the way into step k
  std::vector<Observation> observations;
};

/// Euler step of the balloon dynamics, noise-free.
Vector balloon_dynamics(const VelocityField& field, const Vector& x, double t,
                        double dt);

BalloonRun simulate_balloon(const BalloonConfig& cfg);

// ------------------------------------------------------------- shuttle

inline const std::array<const char*, 9> kShuttleNavStates = {
    "h", "L", "lambda", "v", "gamma", "alpha", "phi", "theta", "psi"};

/// Per-state scaling of the nominal noise levels.
struct NoiseScaling {
  std::array<double, 9> factors{1.5e5, 0.93, 0.32, 1.4e4, 0.03,
                                0.8,   0.6,  0.2,  0.65};
};

NoiseScaling noise_scaling_from_json(const nlohmann::json& j);

struct ScaledNoise {
  Vector process;      // 9 navigation states
  Vector measurement;  // h, L, lambda
};

ScaledNoise scale_noise(double q_x, double r, const NoiseScaling& scaling);

/// Smooth reentry profile. Horizontal speed falls linearly, heading turns at
/// a constant rate and the down velocity changes linearly. Euler angles are
/// the initial angles plus sum_i c_i t^(i+1); yaw also turns with the heading.
struct ShuttleProfile {
  double horizontal_decel = 5.0;  // ft/s^2
  double heading_rate = 2e-4;     // rad/s
  double down_accel = -0.1;       // ft/s^2
  std::vector<double> roll{-2e-4};
  std::vector<double> pitch{1e-4};
  std::vector<double> yaw{};

  /// True body-frame IMU signals at time t for a flight starting at `x0`.
  [[nodiscard]] nav::ImuSample imu_at(const nav::NavState15& x0, double t) const;
};

struct ShuttleImuConfig {
  double accel_noise_var = 1e-6;
  double gyro_noise_var = 1e-12;
  double accel_bias_rw_var = 1e-10;
  double gyro_bias_rw_var = 1e-16;
};

struct ShuttleFilterConfig {
  double position_var = 1e-3;
  double velocity_var = 1e-6;
  double attitude_var = 1e-6;
  double accel_bias_var = 1e-6;
  double gyro_bias_var = 1e-10;
  double theta_var = 1.0;
};

struct ShuttleConfig {
  double dt = 1.4;
  long steps = 600;
  int delta = 1;
  double true_switch = 500.0;
  bool corrupted = true;  // false: no switch at all
  BiasSpec bias = BiasSpec::uniform(BiasKind::Quadratic, {}, 3, 1000.0);
  double q_x = 1e-8;
  double q_p = 1e-12;
  double r = 1e-8;
  NoiseScaling scaling;
  nav::NavState15 initial = default_initial_state();
  std::string reference_source = "generator";  // or "file"
  std::filesystem::path reference_path;
  int substeps = 10;
  ShuttleProfile profile;
  ShuttleImuConfig imu;
  ShuttleFilterConfig filter;
  std::uint64_t seed = 0;

  static nav::NavState15 default_initial_state();
  void validate() const;
};

ShuttleConfig shuttle_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir);
nlohmann::json to_json(const ShuttleConfig& cfg);

/// Reference flight: states at t_k and the true IMU signals held over
/// [t_k, t_k+1).
struct ReferenceTrajectory {
  std::vector<double> times;
  std::vector<nav::NavState15> states;
  std::vector<nav::ImuSample> imu;
};

/// Integrates the profile with `substeps` strapdown steps per dt, sampling
/// the profile at each substep.
ReferenceTrajectory generate_reference(const ShuttleProfile& profile,
                                       const nav::NavState15& x0, double dt,
                                       long steps, int substeps);

/// Strapdown integration of a held IMU stream.
std::vector<nav::NavState15> integrate_imu(const nav::NavState15& x0,
                                           const std::vector<nav::ImuSample>& imu,
                                           double dt, long steps);

/// Bias-free IMU samples that reproduce a state sequence step by step.
std::vector<nav::ImuSample> imu_from_states(
    const std::vector<nav::NavState15>& states, double dt);

std::string reference_csv(const ReferenceTrajectory& ref);
ReferenceTrajectory parse_reference_csv(const std::string& text);

struct ShuttleRun {
  ReferenceTrajectory reference;
  std::vector<nav::NavState15> inertial;  // noiseless ZOH model, RMSE truth
  std::vector<nav::ImuSample> imu;        // measured (biased, noisy)
  std::vector<Vector> accel_bias;         // true bias per sample
  std::vector<Vector> gyro_bias;
  std::vector<Observation> observations;
};

ShuttleRun simulate_shuttle(const ShuttleConfig& cfg);

/// Augmented filter dynamics for step k: strapdown with imu[k-1], IMU biases
/// and bias parameters carried unchanged.
StateMap shuttle_filter_dynamics(const nav::ImuSample& imu, double dt);

}  // namespace skfnav
