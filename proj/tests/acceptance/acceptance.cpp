// Acceptance checks 1-11. One PASS/FAIL line per criterion; exit code 1 on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "skfnav/harness.hpp"
#include "skfnav/inertial_nav.hpp"
#include "skfnav/io.hpp"
#include "skfnav/scenarios.hpp"
#include "skfnav/sweep.hpp"
#include "skfnav/switching_filter.hpp"

#ifndef SKFNAV_CONFIG_DIR
#error "SKFNAV_CONFIG_DIR must point at the configs directory"
#endif

namespace {

using namespace skfnav;
using Clock = std::chrono::steady_clock;

// Tolerances and thresholds, fixed here.
constexpr double kOracleTol = 1e-8;
constexpr double kOracleBudgetS = 1.0;
constexpr int kBalloonSeeds = 20;
constexpr double kGreenShare = 0.80;
constexpr double kRmseBand = 1e-2;
constexpr double kBalloonBudgetS = 120.0;
constexpr double kThetaTol = 1e-9;
constexpr double kLargeBiasShare = 0.95;
constexpr int kNestedConfigs = 50;
constexpr double kNestedTol = 1e-12;
constexpr long kRoundTripSteps = 1000;
constexpr double kRoundTripRelTol = 1e-6;
constexpr double kOrthoTol = 1e-10;
constexpr double kGravityRelTol = 1e-9;
constexpr int kShuttleSeeds = 10;
constexpr double kShuttleBudgetS = 300.0;
constexpr int kRmsePairs = 100;
constexpr double kRmseOracleTol = 1e-12;

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " ("
            << detail << ")" << std::endl;
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

CaseConfig load(const std::string& name) {
  return load_case_config(std::filesystem::path(SKFNAV_CONFIG_DIR) / name);
}

template <typename F>
void guarded(int id, const std::string& what, F body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, what, std::string("exception: ") + e.what());
  }
}

// 1: UKF against a closed-form Kalman filter on a linear model.
void criterion1() {
  const auto start = Clock::now();
  const double dt = 0.1;
  Matrix A(2, 2);
  A << 1.0, dt, 0.0, 1.0;
  Matrix H(1, 2);
  H << 1.0, 0.0;
  const Matrix Q = 1e-3 * Matrix::Identity(2, 2);
  Matrix R(1, 1);
  R << 0.05;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01(0.0, 1.0);

  GaussianBelief ukf{Vector::Zero(2), Matrix::Identity(2, 2)};
  Vector kf_mean = ukf.mean;
  Matrix kf_cov = ukf.cov;
  Vector truth(2);
  truth << 0.0, 1.0;
  double worst_mean = 0.0, worst_cov = 0.0;
  const StateMap f = [&A](const Vector& x) { return Vector(A * x); };
  const StateMap h = [&H](const Vector& x) { return Vector(H * x); };
  for (int k = 0; k < 200; ++k) {
    truth = A * truth;
    Vector y(1);
    y << truth(0) + std::sqrt(R(0, 0)) * n01(rng);

    ukf = predict(ukf, f, Q, {});
    ukf = update(ukf, h, y, R, {}).posterior;

    kf_mean = A * kf_mean;
    kf_cov = A * kf_cov * A.transpose() + Q;
    const Matrix S = H * kf_cov * H.transpose() + R;
    const Matrix K = kf_cov * H.transpose() * S.inverse();
    kf_mean += K * (y - H * kf_mean);
    kf_cov = (Matrix::Identity(2, 2) - K * H) * kf_cov;

    worst_mean = std::max(worst_mean, (ukf.mean - kf_mean).cwiseAbs().maxCoeff());
    worst_cov = std::max(worst_cov, (ukf.cov - kf_cov).cwiseAbs().maxCoeff());
  }
  const double elapsed = seconds_since(start);
  report(1, worst_mean <= kOracleTol && worst_cov <= kOracleTol && elapsed < kOracleBudgetS,
         "unscented filter matches linear Kalman filter over 200 steps",
         "max mean err " + fmt(worst_mean) + ", max cov err " + fmt(worst_cov) + ", " +
             fmt(elapsed) + " s");
}

struct SeedStats {
  int green = 0;
  int runs = 0;
  std::vector<double> rmse_lon, rmse_lat;
  std::vector<std::string> errors;
};

SeedStats run_seeds(const CaseConfig& cfg, int seeds) {
  SeedStats s;
  for (int seed = 1; seed <= seeds; ++seed) {
    const RunRecord r = run_case(cfg, static_cast<std::uint64_t>(seed)).record;
    ++s.runs;
    if (!r.ok) s.errors.push_back(r.error);
    if (r.ok && r.outcome == Outcome::Green) ++s.green;
    if (r.rmse.size() >= 2) {
      s.rmse_lon.push_back(r.rmse[0]);
      s.rmse_lat.push_back(r.rmse[1]);
    }
  }
  return s;
}

// 2: static-bias balloon analog.
void criterion2() {
  const auto start = Clock::now();
  const SeedStats s = run_seeds(load("table3_test3.json"), kBalloonSeeds);
  const double share = static_cast<double>(s.green) / s.runs;
  const double lon = median(s.rmse_lon), lat = median(s.rmse_lat);
  const double elapsed = seconds_since(start);
  report(2,
         share >= kGreenShare && lon <= kRmseBand && lat <= kRmseBand &&
             elapsed < kBalloonBudgetS,
         "balloon static bias A=0.2 switch recovered",
         std::to_string(s.green) + "/" + std::to_string(s.runs) + " green, median rmse lon " +
             fmt(lon) + " lat " + fmt(lat) + ", " + fmt(elapsed) + " s");
}

// 3: static plus quadratic balloon analog.
void criterion3() {
  const SeedStats s = run_seeds(load("table3_test6.json"), kBalloonSeeds);
  const double share = static_cast<double>(s.green) / s.runs;
  report(3, share >= kGreenShare, "balloon A=0.1 C=0.01 under r=1e-3 switch recovered",
         std::to_string(s.green) + "/" + std::to_string(s.runs) + " green");
}

// 4: unbiased balloon, nominal never learns theta.
void criterion4() {
  const CaseConfig cfg = load("table3_test8.json");
  int clean = 0;
  double worst_theta = 0.0;
  RunOptions opts;
  opts.keep_details = true;
  for (int seed = 1; seed <= kBalloonSeeds; ++seed) {
    const RunResult res = run_case(cfg, static_cast<std::uint64_t>(seed), opts);
    if (res.record.ok && res.record.outcome == Outcome::Green) ++clean;
    if (!res.branches) {
      worst_theta = INFINITY;
      continue;
    }
    const auto& hist = res.branches->nominal.history;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      worst_theta = std::max(worst_theta, hist.mean_at(i).tail(3).cwiseAbs().maxCoeff());
    }
  }
  report(4, clean == kBalloonSeeds && worst_theta <= kThetaTol,
         "unbiased balloon reports no corruption and nominal theta stays zero",
         std::to_string(clean) + "/" + std::to_string(kBalloonSeeds) +
             " no-corruption, max |theta| " + fmt(worst_theta));
}

// 5: success rate non-decreasing in the static bias.
void criterion5() {
  CaseConfig base = load("table3_test3.json");
  base.balloon.r = 1e-5;
  base.balloon.q_x = 1e-6;
  base.balloon.q_p = 1e-6;
  base.balloon.true_switch = 2.0;
  const std::vector<double> amplitudes = {0.001, 0.01, 0.1, 0.5};
  std::vector<double> rates;
  for (double a : amplitudes) {
    CaseConfig cfg = base;
    cfg.balloon.bias = BiasSpec::uniform(BiasKind::Quadratic, {a, 0.0, 0.0}, 2);
    const SeedStats s = run_seeds(cfg, kBalloonSeeds);
    rates.push_back(static_cast<double>(s.green) / s.runs);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < rates.size(); ++i) monotone &= rates[i] >= rates[i - 1];
  std::string detail;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    detail += (i ? ", " : "") + std::string("A=") + fmt(amplitudes[i]) + ": " + fmt(rates[i]);
  }
  report(5, monotone && rates.back() >= kLargeBiasShare,
         "success rate non-decreasing in static bias", detail);
}

// 6: a spawned branch starts from the nominal prior, checked against an
// independently run nominal filter.
void criterion6() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = 0.0;
  long spawns = 0;
  for (int c = 0; c < kNestedConfigs; ++c) {
    const int n = 1 + static_cast<int>(u01(rng) * 3);
    const double q = std::pow(10.0, -6.0 + 4.0 * u01(rng));
    const double r = std::pow(10.0, -6.0 + 4.0 * u01(rng));
    const double q_p = std::pow(10.0, -8.0 + 6.0 * u01(rng));
    SwitchingFilterConfig fc;
    fc.capacity = 2 + static_cast<int>(u01(rng) * 8);
    fc.delta = 1 + static_cast<int>(u01(rng) * 3);
    fc.dt = 0.01;
    const long steps = 60;
    const long switch_step = 10 + static_cast<long>(u01(rng) * 40);
    const double bias = u01(rng);

    std::vector<int> observed(n);
    for (int i = 0; i < n; ++i) observed[i] = i;
    QuadraticBiasLayout layout = u01(rng) < 0.5 ? QuadraticBiasLayout::shared(observed, n)
                                                : QuadraticBiasLayout::per_channel(observed, n);
    const double decay = 0.9 + 0.1 * u01(rng);
    const StateMap f = [decay](const Vector& x) { return Vector(decay * x); };
    StepModel model;
    model.dynamics = augment_dynamics(f, n);
    model.Q_aug = augment(Vector::Zero(n), Vector::Zero(layout.theta_dim()),
                          q * Matrix::Identity(n, n), q_p).Q;
    model.layout = &layout;
    model.R = r * Matrix::Identity(n, n);

    Vector x0(n);
    for (int i = 0; i < n; ++i) x0(i) = n01(rng);
    BranchSet set = init(x0, Matrix::Identity(n, n), layout.theta_dim(), fc);
    GaussianBelief replica = set.nominal.belief;
    GaussianBelief replica_prior;

    StepHooks hooks;
    hooks.on_spawn = [&](long, const Branch& spawned, const Branch&) {
      ++spawns;
      const double dm = (spawned.belief.mean - replica_prior.mean).cwiseAbs().maxCoeff();
      const double dc = (spawned.belief.cov - replica_prior.cov).cwiseAbs().maxCoeff();
      worst = std::max({worst, dm, dc});
    };

    Vector truth = x0;
    const StateMap nominal_h = [&layout](const Vector& x) {
      return nominal_observation(x, layout);
    };
    for (long k = 1; k <= steps; ++k) {
      truth = decay * truth;
      for (int i = 0; i < n; ++i) truth(i) += std::sqrt(q) * n01(rng);
      std::optional<Vector> y;
      replica = predict(replica, model.dynamics, model.Q_aug, fc.ukf);
      if (k % fc.delta == 0) {
        Vector obs = truth;
        for (int i = 0; i < n; ++i) {
          obs(i) += std::sqrt(r) * n01(rng) + (k > switch_step ? bias : 0.0);
        }
        y = obs;
        replica_prior = replica;
        replica = update(replica, nominal_h, obs, model.R, fc.ukf).posterior;
      }
      set = step(std::move(set), k, y, model, fc, &hooks);
    }
  }
  report(6, spawns > 0 && worst <= kNestedTol,
         "spawned branches start from the nominal prior belief",
         std::to_string(kNestedConfigs) + " configs, " + std::to_string(spawns) +
             " spawns, max deviation " + fmt(worst));
}

// 7: branch count bounded and pruning removes the minimum logL.
void criterion7() {
  long violations = 0, prunes = 0, epochs = 0;
  StepHooks hooks;
  hooks.on_prune = [&](const PruneEvent& ev) {
    ++prunes;
    if (ev.removed_logL != ev.min_logL) ++violations;
  };
  for (const char* name : {"table3_test3.json", "table3_test7.json"}) {
    const CaseConfig cfg = load(name);
    const BalloonRun run = simulate_balloon(cfg.balloon);
    SwitchingFilterConfig fc;
    fc.capacity = cfg.branches;
    fc.dt = cfg.balloon.dt;
    fc.delta = cfg.balloon.delta;
    const QuadraticBiasLayout layout = QuadraticBiasLayout::shared({0, 1}, 2);
    StepModel model;
    model.Q_aug = augment(cfg.balloon.x0, Vector::Zero(3),
                          cfg.balloon.q_x * Matrix::Identity(2, 2), cfg.balloon.q_p).Q;
    model.layout = &layout;
    model.R = cfg.balloon.r * Matrix::Identity(2, 2);
    BranchSet set = init(cfg.balloon.x0, Matrix::Identity(2, 2), 3, fc);
    std::size_t next_obs = 0;
    for (long k = 1; k <= cfg.balloon.steps; ++k) {
      const double t_prev = static_cast<double>(k - 1) * fc.dt;
      const VelocityField field = cfg.balloon.field;
      model.dynamics = augment_dynamics(
          [field, t_prev, dt = fc.dt](const Vector& x) {
            return balloon_dynamics(field, x, t_prev, dt);
          },
          2);
      std::optional<Vector> y;
      if (next_obs < run.observations.size() && run.observations[next_obs].step == k) {
        y = run.observations[next_obs++].y;
      }
      set = step(std::move(set), k, y, model, fc, &hooks);
      if (y) {
        ++epochs;
        if (set.total() > static_cast<std::size_t>(fc.capacity)) ++violations;
      }
    }
  }
  report(7, violations == 0 && prunes > 0,
         "branch count within capacity and pruning removes the minimum logL",
         std::to_string(epochs) + " epochs, " + std::to_string(prunes) + " prunes, " +
             std::to_string(violations) + " violations");
}

// 8: strapdown round trip and gravity constant.
void criterion8() {
  ShuttleConfig cfg;
  const double dt = cfg.dt;
  const ReferenceTrajectory ref =
      generate_reference(cfg.profile, cfg.initial, dt, kRoundTripSteps, 1);
  const auto imu = imu_from_states(ref.states, dt);
  const auto again = integrate_imu(ref.states.front(), imu, dt, kRoundTripSteps);
  double worst_pos = 0.0, worst_ortho = 0.0;
  for (std::size_t k = 0; k < ref.states.size(); ++k) {
    const auto& a = ref.states[k];
    const auto& b = again[k];
    worst_pos = std::max({worst_pos, std::abs(b.h - a.h) / std::abs(a.h),
                          std::abs(b.L - a.L) / std::abs(a.L),
                          std::abs(b.lambda - a.lambda) / std::abs(a.lambda)});
    const nav::Mat3 c = nav::attitude_matrix(b.phi, b.theta, b.psi);
    worst_ortho = std::max(worst_ortho,
                           (c * c.transpose() - nav::Mat3::Identity()).cwiseAbs().maxCoeff());
  }
  const double g0 = nav::gravity(0.0)(2);
  const double expected = nav::kJ1 / (nav::kEarthRadius * nav::kEarthRadius);
  const double g_err = std::abs(g0 - expected) / expected;
  report(8,
         worst_pos <= kRoundTripRelTol && worst_ortho <= kOrthoTol && g_err <= kGravityRelTol,
         "strapdown round trip over 1000 steps and sea-level gravity",
         "max position rel err " + fmt(worst_pos) + ", orthonormality err " + fmt(worst_ortho) +
             ", g(0) = " + fmt(g0) + " ft/s^2");
}

// 9: shuttle large-bias switch detection.
void criterion9() {
  const auto start = Clock::now();
  CaseConfig cfg = load("table5_test22.json");
  int hits = 0;
  std::string misses;
  for (int seed = 1; seed <= kShuttleSeeds; ++seed) {
    const RunRecord r = run_case(cfg, static_cast<std::uint64_t>(seed)).record;
    const bool hit = r.ok && r.estimated_switch && r.true_switch &&
                     std::abs(*r.estimated_switch - *r.true_switch) <= r.dt * (1.0 + 1e-9);
    if (hit) {
      ++hits;
    } else {
      misses += " seed " + std::to_string(seed) +
                (r.ok ? "" : " failed: " + r.error);
    }
  }
  const double elapsed = seconds_since(start);
  report(9,
         static_cast<double>(hits) / kShuttleSeeds >= kGreenShare && elapsed < kShuttleBudgetS,
         "shuttle A=100 B=100 switch within one GPS epoch",
         std::to_string(hits) + "/" + std::to_string(kShuttleSeeds) + " within one epoch, " +
             fmt(elapsed) + " s" + (misses.empty() ? "" : ";" + misses));
}

// 10: relative RMSE against a direct evaluation.
void criterion10() {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> len(1, 300);
  std::uniform_int_distribution<int> dim(1, 9);
  double worst = 0.0;
  for (int p = 0; p < kRmsePairs; ++p) {
    const int n = len(rng), d = dim(rng);
    std::vector<Vector> est(n, Vector(d)), truth(n, Vector(d));
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < d; ++i) {
        truth[k](i) = u(rng);
        est[k](i) = truth[k](i) + 0.1 * u(rng);
      }
    }
    const Vector got = rmse(est, truth);
    for (int i = 0; i < d; ++i) {
      long double num = 0.0L, den = 0.0L;
      for (int k = 0; k < n; ++k) {
        const long double e = static_cast<long double>(est[k](i)) - truth[k](i);
        num += e * e;
        den += static_cast<long double>(truth[k](i)) * truth[k](i);
      }
      const double direct = static_cast<double>(std::sqrt(num / den));
      worst = std::max(worst, std::abs(got(i) - direct));
    }
  }
  report(10, worst <= kRmseOracleTol, "relative RMSE matches direct evaluation",
         std::to_string(kRmsePairs) + " pairs, max abs diff " + fmt(worst));
}

std::string run_mini_sweep(const char* threads, const std::filesystem::path& out) {
  setenv("SKFNAV_THREADS", threads, 1);
  nlohmann::json j;
  j["sweep_id"] = "determinism";
  j["base_config"] = std::string(SKFNAV_CONFIG_DIR) + "/table3_test6.json";
  j["axes"] = {{"A", {0.01, 0.1}}, {"r", {1e-5, 1e-3}}};
  j["replications"] = 3;
  j["seed"] = 11;
  const SweepGrid grid = sweep_grid_from_json(j, SKFNAV_CONFIG_DIR);
  const SweepResult res = run_sweep(grid);
  std::vector<std::string> axes;
  for (const auto& a : grid.axes) axes.push_back(a.name);
  write_outputs(out, j, res.records, res.aggregates, axes);
  unsetenv("SKFNAV_THREADS");
  return io::read_text_file(out / "records.csv");
}

// 11: records.csv independent of the worker count.
void criterion11() {
  const auto root = std::filesystem::temp_directory_path() / "skfnav_acceptance";
  std::filesystem::remove_all(root);
  const std::string one = run_mini_sweep("1", root / "t1");
  const std::string four = run_mini_sweep("4", root / "t4");
  std::filesystem::remove_all(root);
  report(11, !one.empty() && one == four, "records.csv identical for 1 and 4 threads",
         std::to_string(one.size()) + " vs " + std::to_string(four.size()) + " bytes");
}

}  // namespace

int main() {
  guarded(1, "unscented filter matches linear Kalman filter", criterion1);
  guarded(2, "balloon static bias switch recovered", criterion2);
  guarded(3, "balloon static plus quadratic bias switch recovered", criterion3);
  guarded(4, "unbiased balloon", criterion4);
  guarded(5, "success rate non-decreasing in static bias", criterion5);
  guarded(6, "spawned branches start from the nominal prior", criterion6);
  guarded(7, "pruning contract", criterion7);
  guarded(8, "strapdown round trip", criterion8);
  guarded(9, "shuttle large-bias detection", criterion9);
  guarded(10, "RMSE oracle", criterion10);
  guarded(11, "determinism across thread counts", criterion11);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
