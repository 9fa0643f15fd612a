#pragma once

// Branched, selective switching Kalman filter.
//
// One nominal branch assimilates every measurement with the bias-free model.
// At each observation epoch a new corrupted branch is split off the nominal
// prediction; it hypothesises that the switch happened right after the
// previous epoch, so its first biased update is the current one. Corrupted
// branches learn the quadratic bias parameters through state augmentation.
// Only the M-1 corrupted branches with the largest accumulated likelihood are
// kept; the nominal branch is never pruned.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skfnav/bias_models.hpp"
#include "skfnav/gaussian_filter.hpp"

namespace skfnav {

enum class HistoryMode { Full, CurrentOnly };

/// Per-step record of a branch: posterior means, marginal variances and the
/// accumulated likelihood. Stored flat, step-major.
struct BranchHistory {
  Eigen::Index dim = 0;
  std::vector<long> steps;
  std::vector<double> times;
  std::vector<double> log_likelihoods;
  std::vector<double> means;
  std::vector<double> variances;

  [[nodiscard]] std::size_t size() const { return steps.size(); }
  void append(long step, double time, double logL, const GaussianBelief& b);
  [[nodiscard]] Vector mean_at(std::size_t i) const;
  [[nodiscard]] Vector variance_at(std::size_t i) const;
};

struct Branch {
  bool nominal = false;
  double t_s = 0.0;   // hypothesised switch time, 0 for the nominal branch
  long s_index = 0;   // step index of t_s
  double logL = 0.0;  // accumulated simplified log-likelihood
  bool failed = false;  // numerical or domain failure; logL is then -inf
  std::string failure;
  GaussianBelief belief;
  BranchHistory history;
};

struct BranchSet {
  Branch nominal;
  std::vector<Branch> corrupted;  // ordered by t_s
  int capacity = 10;              // M: nominal + corrupted <= M

  [[nodiscard]] std::size_t total() const { return 1 + corrupted.size(); }
};

struct PruneEvent {
  long step = 0;
  double removed_t_s = 0.0;
  double removed_logL = 0.0;
  double min_logL = 0.0;  // over corrupted branches before removal
  std::size_t remaining = 0;
};

/// Optional instrumentation, used by tests and diagnostics.
struct StepHooks {
  /// Called with the freshly split branch before its first corrupted update,
  /// together with the nominal branch's prior at the same epoch.
  std::function<void(long step, const Branch& spawned, const Branch& nominal_prior)>
      on_spawn;
  std::function<void(const PruneEvent&)> on_prune;
  /// A branch hit a numerical or domain error and was retired.
  std::function<void(long step, const Branch& branch)> on_failure;
};

struct SwitchingFilterConfig {
  int capacity = 10;
  double dt = 1.0;
  int delta = 1;  // observation every `delta` steps
  SigmaPointParams ukf;
  HistoryMode history = HistoryMode::Full;

  void validate() const;
};

/// Everything a step needs to know about the model at time t_k.
struct StepModel {
  StateMap dynamics;             // on the augmented state
  Matrix Q_aug;                  // augmented process noise
  const QuadraticBiasLayout* layout = nullptr;
  Matrix R;
};

/// Nominal branch with mean [x0, 0...0] and covariance diag(C0, theta_var I).
BranchSet init(const Vector& x0, const Matrix& C0, int d_theta,
               const SwitchingFilterConfig& config, double theta_var = 1.0);

/// Unscented prediction of every branch; logL and t_s untouched.
BranchSet predict_all(BranchSet set, const StateMap& dynamics,
                      const Matrix& Q_aug, const SigmaPointParams& params,
                      long step = -1);

/// One filter step at index k (time k dt): predict, and when `y` is present
/// run the double update (nominal with H-bar, every corrupted branch and the
/// new split with H-tilde), then prune.
///
/// A corrupted branch that fails numerically is dropped. A failed nominal
/// branch is frozen with logL = -inf and no longer spawns. Throws
/// NumericalError once no branch is left alive.
BranchSet step(BranchSet set, long k, const std::optional<Vector>& y,
               const StepModel& model, const SwitchingFilterConfig& config,
               const StepHooks* hooks = nullptr);

/// Removes lowest-likelihood corrupted branches until at most M-1 remain.
/// Ties remove the latest t_s first.
BranchSet prune(BranchSet set, long step = -1, const StepHooks* hooks = nullptr);

struct Estimate {
  bool nominal_best = true;
  std::size_t best_index = 0;  // index into corrupted when !nominal_best
  std::optional<double> switch_time;
  std::optional<long> switch_index;
  double best_logL = 0.0;
  /// Normalised exp(logL - max logL): nominal first, then corrupted in order.
  std::vector<double> weights;
};

/// Most likely branch (ties favour the nominal, then the earlier t_s).
Estimate estimate(const BranchSet& set);

const Branch& best_branch(const BranchSet& set, const Estimate& est);

/// Moment-matched Gaussian of a weighted mixture.
GaussianBelief model_average(const std::vector<GaussianBelief>& beliefs,
                             const std::vector<double>& weights);

/// Mixture of all surviving branches weighted by `estimate(set).weights`.
GaussianBelief model_average(const BranchSet& set);

/// CSV rows (step, time, branch_t_s, logL, means..., diag cov...) for every
/// branch in the set, nominal first. `state_names` labels the columns.
std::string branch_trajectory_csv(const BranchSet& set,
                                  const std::vector<std::string>& state_names);

}  // namespace skfnav
