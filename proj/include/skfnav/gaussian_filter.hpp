#pragma once

// Unscented Gaussian filter primitives shared by every branch of the
// switching filter. All functions are pure: beliefs go in, new beliefs come
// out.

#include <Eigen/Dense>

#include <functional>

#include "skfnav/errors.hpp"

namespace skfnav {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Maps a (possibly augmented) state to the next state or to a measurement.
using StateMap = std::function<Vector(const Vector&)>;

struct GaussianBelief {
  Vector mean;
  Matrix cov;

  [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

struct SigmaPointParams {
  double alpha = 1e-1;
  double beta = 2.0;
  double kappa = 0.0;

  /// Throws ConfigError unless alpha > 0 and alpha^2 (d + kappa) > 0.
  void validate(Eigen::Index dim) const;
};

/// 2d+1 points stored column-wise with their mean and covariance weights.
struct SigmaPointSet {
  Matrix points;
  Vector mean_weights;
  Vector cov_weights;
};

struct PredictedObservation {
  Vector mu;
  Matrix D;
};

struct UpdateResult {
  GaussianBelief posterior;
  PredictedObservation predicted;
};

/// Raised when a dynamics map yields non-finite values.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step)
      : NumericalError(what), step_(step) {}
  [[nodiscard]] long step() const { return step_; }

 private:
  long step_;
};

/// C <- (C + C^T) / 2
void symmetrize(Matrix& cov);

/// Returns S with S S^T = cov. Tries a plain Cholesky, then a pivoted LDL^T
/// (handles singular PSD input exactly), then Cholesky with diagonal jitter
/// escalating 1e-12 .. 1e-6. Throws NumericalError("covariance not PSD").
Matrix covariance_square_root(const Matrix& cov);

SigmaPointSet sigma_points(const GaussianBelief& belief,
                           const SigmaPointParams& params);

/// Unscented time update. `step` is only used to tag divergence errors.
GaussianBelief predict(const GaussianBelief& belief, const StateMap& dynamics,
                       const Matrix& Q, const SigmaPointParams& params,
                       long step = -1);

/// Unscented measurement update. The returned PredictedObservation holds the
/// pre-update predicted measurement and innovation covariance (R included).
UpdateResult update(const GaussianBelief& belief, const StateMap& observation,
                    const Vector& y, const Matrix& R,
                    const SigmaPointParams& params);

/// Constant-free marginal log-likelihood term
///   -log|D| - (y - mu)^T D^{-1} (y - mu).
/// Larger is better. Not a calibrated log-probability.
double log_likelihood_increment(const Vector& y,
                                const PredictedObservation& pred);

}  // namespace skfnav
