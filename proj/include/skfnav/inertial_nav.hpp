#pragma once

// Strapdown inertial navigation over a flat, non-rotating Earth frame with
// North-East-Down axes. Attitude uses 3-2-1 Euler angles; velocity is stored
// in polar form (speed, flight-path angle, azimuth) and converted to the NED
// vector inside each step. Units: ft, s, rad.

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

#include "skfnav/gaussian_filter.hpp"

namespace skfnav::nav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kJ1 = 0.14076539e17;   // ft^3 / s^2
inline constexpr double kEarthRadius = 20902900.0;  // ft
inline constexpr double kPitchGuard = 1e-6;     // rad below pi/2

/// Indices into the 15-entry navigation state vector.
namespace idx {
inline constexpr int h = 0;
inline constexpr int L = 1;
inline constexpr int lambda = 2;
inline constexpr int v = 3;
inline constexpr int gamma = 4;
inline constexpr int alpha = 5;
inline constexpr int phi = 6;
inline constexpr int theta = 7;
inline constexpr int psi = 8;
inline constexpr int accel_bias = 9;
inline constexpr int gyro_bias = 12;
inline constexpr int size = 15;
}  // namespace idx

struct NavState15 {
  double h = 0.0;       // altitude
  double L = 0.0;       // "longitude" (north-rate coordinate)
  double lambda = 0.0;  // "latitude" (east-rate coordinate)
  double v = 0.0;       // speed
  double gamma = 0.0;   // flight-path angle
  double alpha = 0.0;   // azimuth from North
  double phi = 0.0;
  double theta = 0.0;
  double psi = 0.0;
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();

  [[nodiscard]] Vector to_vector() const;
  static NavState15 from_vector(const Vector& x);

  [[nodiscard]] Vec3 euler() const { return {phi, theta, psi}; }
  /// Velocity resolved in NED.
  [[nodiscard]] Vec3 velocity_ned() const;
};

const std::vector<std::string>& state_names();

struct ImuSample {
  Vec3 specific_force = Vec3::Zero();  // body frame, ft/s^2
  Vec3 angular_rate = Vec3::Zero();    // body frame, rad/s
};

/// Wraps to (-pi, pi].
double wrap_angle(double a);

/// C^i_b for roll/pitch/yaw. Maps body-frame vectors into the NED frame.
Mat3 attitude_matrix(double phi, double theta, double psi);

/// Euler angle rates from bias-corrected body rates. Throws DomainError on
/// gimbal singularity.
Vec3 euler_rates(const NavState15& state, const Vec3& omega_meas);

/// Forward-Euler attitude step, angles wrapped.
Vec3 attitude_update(const NavState15& state, const Vec3& omega_meas, double dt);

/// (0, 0, J1 / (R + h)^2): horizontal components are zero, third is down.
Vec3 gravity(double h);

/// Speed, flight-path angle and azimuth of an NED velocity. A zero vector
/// keeps `fallback_azimuth`.
void polar_from_ned(const Vec3& v_ned, double fallback_azimuth, double& v,
                    double& gamma, double& alpha);

/// Attitude, specific-force transform, velocity and position update.
/// IMU biases are left unchanged.
NavState15 strapdown_step(const NavState15& state, const ImuSample& imu,
                          double dt);

/// Random-walk step of the IMU biases.
void propagate_imu_bias(Vec3& accel_bias, Vec3& gyro_bias,
                        const Mat3& accel_cov, const Mat3& gyro_cov,
                        std::mt19937_64& rng);

struct ImuNoise {
  Mat3 accel_cov = Mat3::Zero();
  Mat3 gyro_cov = Mat3::Zero();
};

/// Biased, noisy IMU reading of the true body-frame signals.
ImuSample synthesize_imu(const Vec3& true_specific_force,
                         const Vec3& true_angular_rate, const Vec3& accel_bias,
                         const Vec3& gyro_bias, const ImuNoise& noise,
                         std::mt19937_64& rng);

/// Exact inverse of `strapdown_step`: the bias-free IMU sample that carries
/// `before` to `after` in one step of length dt (attitude and velocity).
ImuSample imu_between(const NavState15& before, const NavState15& after,
                      double dt);

/// Draw from N(0, cov) for a 3x3 covariance.
Vec3 draw_gaussian(const Mat3& cov, std::mt19937_64& rng);

}  // namespace skfnav::nav
