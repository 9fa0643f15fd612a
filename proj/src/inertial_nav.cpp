#include "skfnav/inertial_nav.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "skfnav/errors.hpp"

namespace skfnav::nav {

Vector NavState15::to_vector() const {
  Vector x(idx::size);
  x << h, L, lambda, v, gamma, alpha, phi, theta, psi, accel_bias, gyro_bias;
  return x;
}

NavState15 NavState15::from_vector(const Vector& x) {
  if (x.size() < idx::size) {
    throw ContractError("navigation state needs 15 entries");
  }
  NavState15 s;
  s.h = x(idx::h);
  s.L = x(idx::L);
  s.lambda = x(idx::lambda);
  s.v = x(idx::v);
  s.gamma = x(idx::gamma);
  s.alpha = x(idx::alpha);
  s.phi = x(idx::phi);
  s.theta = x(idx::theta);
  s.psi = x(idx::psi);
  s.accel_bias = x.segment<3>(idx::accel_bias);
  s.gyro_bias = x.segment<3>(idx::gyro_bias);
  return s;
}

Vec3 NavState15::velocity_ned() const {
  const double cg = std::cos(gamma);
  return {v * cg * std::cos(alpha), v * cg * std::sin(alpha),
          -v * std::sin(gamma)};
}

const std::vector<std::string>& state_names() {
  static const std::vector<std::string> names{
      "h",    "L",    "lambda", "v",    "gamma", "alpha", "phi",  "theta",
      "psi",  "b_ax", "b_ay",   "b_az", "b_gx",  "b_gy",  "b_gz"};
  return names;
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  if (a > -pi && a <= pi) return a;
  double w = std::remainder(a, 2.0 * pi);
  if (w <= -pi) w += 2.0 * pi;
  return w;
}

Mat3 attitude_matrix(double phi, double theta, double psi) {
  const double cf = std::cos(phi), sf = std::sin(phi);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cp = std::cos(psi), sp = std::sin(psi);
  Mat3 c;
  c << ct * cp, ct * sp, -st,
      sf * st * cp - cf * sp, sf * st * sp + cf * cp, sf * ct,
      cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct;
  return c;
}

namespace {

Mat3 rate_matrix(double phi, double theta) {
  if (!(std::abs(theta) < std::numbers::pi / 2.0 - kPitchGuard)) {
    throw DomainError("gimbal singularity");
  }
  const double cf = std::cos(phi), sf = std::sin(phi);
  const double ct = std::cos(theta), tt = std::tan(theta);
  Mat3 e;
  e << 1.0, sf * tt, cf * tt,
      0.0, cf, -sf,
      0.0, sf / ct, cf / ct;
  return e;
}

Vec3 to_ned(double v, double gamma, double alpha) {
  const double cg = std::cos(gamma);
  return {v * cg * std::cos(alpha), v * cg * std::sin(alpha),
          -v * std::sin(gamma)};
}

}  // namespace

Vec3 euler_rates(const NavState15& state, const Vec3& omega_meas) {
  return rate_matrix(state.phi, state.theta) * (omega_meas - state.gyro_bias);
}

Vec3 attitude_update(const NavState15& state, const Vec3& omega_meas,
                     double dt) {
  const Vec3 next = state.euler() + euler_rates(state, omega_meas) * dt;
  return {wrap_angle(next(0)), wrap_angle(next(1)), wrap_angle(next(2))};
}

Vec3 gravity(double h) {
  const double r = kEarthRadius + h;
  return {0.0, 0.0, kJ1 / (r * r)};
}

void polar_from_ned(const Vec3& v_ned, double fallback_azimuth, double& v,
                    double& gamma, double& alpha) {
  v = v_ned.norm();
  if (v == 0.0) {
    gamma = 0.0;
    alpha = fallback_azimuth;
    return;
  }
  gamma = std::asin(std::clamp(-v_ned(2) / v, -1.0, 1.0));
  alpha = std::atan2(v_ned(1), v_ned(0));
}

NavState15 strapdown_step(const NavState15& state, const ImuSample& imu,
                          double dt) {
  if (!(dt > 0.0)) throw ContractError("dt must be positive");
  NavState15 next = state;

  const Vec3 angles = attitude_update(state, imu.angular_rate, dt);
  next.phi = angles(0);
  next.theta = angles(1);
  next.psi = angles(2);

  const Mat3 c_avg = 0.5 * (attitude_matrix(state.phi, state.theta, state.psi) +
                            attitude_matrix(next.phi, next.theta, next.psi));
  const Vec3 f_i = c_avg * (imu.specific_force - state.accel_bias);

  const Vec3 v_before = state.velocity_ned();
  const Vec3 v_after = v_before + (f_i + gravity(state.h)) * dt;
  polar_from_ned(v_after, state.alpha, next.v, next.gamma, next.alpha);
  next.alpha = wrap_angle(next.alpha);

  next.h = state.h - 0.5 * dt * (v_before(2) + v_after(2));
  const double r_before = kEarthRadius + state.h;
  const double r_after = kEarthRadius + next.h;
  next.L = state.L + 0.5 * dt * (v_before(0) / r_before + v_after(0) / r_after);

  const double cl_before = std::cos(state.L);
  const double cl_after = std::cos(next.L);
  if (std::abs(cl_before) < 1e-12 || std::abs(cl_after) < 1e-12) {
    throw DomainError("polar singularity");
  }
  next.lambda = state.lambda +
                0.5 * dt *
                    (v_before(1) / (r_before * cl_before) +
                     v_after(1) / (r_after * cl_after));
  return next;
}

Vec3 draw_gaussian(const Mat3& cov, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec3 z;
  for (int i = 0; i < 3; ++i) z(i) = n01(rng);
  if (cov.isZero(0.0)) return Vec3::Zero();
  const Matrix s = covariance_square_root(Matrix(cov));
  return s * z;
}

void propagate_imu_bias(Vec3& accel_bias, Vec3& gyro_bias,
                        const Mat3& accel_cov, const Mat3& gyro_cov,
                        std::mt19937_64& rng) {
  accel_bias += draw_gaussian(accel_cov, rng);
  gyro_bias += draw_gaussian(gyro_cov, rng);
}

ImuSample synthesize_imu(const Vec3& true_specific_force,
                         const Vec3& true_angular_rate, const Vec3& accel_bias,
                         const Vec3& gyro_bias, const ImuNoise& noise,
                         std::mt19937_64& rng) {
  ImuSample s;
  s.specific_force =
      true_specific_force + accel_bias + draw_gaussian(noise.accel_cov, rng);
  s.angular_rate =
      true_angular_rate + gyro_bias + draw_gaussian(noise.gyro_cov, rng);
  return s;
}

ImuSample imu_between(const NavState15& before, const NavState15& after,
                      double dt) {
  if (!(dt > 0.0)) throw ContractError("dt must be positive");
  const Vec3 d_angles{wrap_angle(after.phi - before.phi),
                      wrap_angle(after.theta - before.theta),
                      wrap_angle(after.psi - before.psi)};
  const Mat3 e = rate_matrix(before.phi, before.theta);
  ImuSample s;
  s.angular_rate = e.partialPivLu().solve(d_angles / dt) + before.gyro_bias;

  const Vec3 f_i = (to_ned(after.v, after.gamma, after.alpha) -
                    to_ned(before.v, before.gamma, before.alpha)) /
                       dt -
                   gravity(before.h);
  const Mat3 c_avg =
      0.5 * (attitude_matrix(before.phi, before.theta, before.psi) +
             attitude_matrix(after.phi, after.theta, after.psi));
  s.specific_force = c_avg.partialPivLu().solve(f_i) + before.accel_bias;
  return s;
}

}  // namespace skfnav::nav
