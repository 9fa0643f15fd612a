#include "skfnav/gaussian_filter.hpp"

#include <cmath>
#include <string>

namespace skfnav {
namespace {

constexpr double kMinInnovationRcond = 1e-15;

bool all_finite(const Matrix& m) { return m.allFinite(); }

// Factor D once; used both by the update and by the likelihood term.
Eigen::LLT<Matrix> factor_innovation(const Matrix& D) {
  if (!all_finite(D)) {
    throw NumericalError("innovation covariance singular: non-finite entries");
  }
  Eigen::LLT<Matrix> llt(D);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinInnovationRcond) {
    throw NumericalError("innovation covariance singular");
  }
  return llt;
}

}  // namespace

void SigmaPointParams::validate(Eigen::Index dim) const {
  if (!(alpha > 0.0)) {
    throw ConfigError("sigma-point alpha must be positive");
  }
  if (!(alpha * alpha * (static_cast<double>(dim) + kappa) > 0.0)) {
    throw ConfigError("sigma-point scaling alpha^2 (d + kappa) must be positive");
  }
}

void symmetrize(Matrix& cov) {
  cov = 0.5 * (cov + cov.transpose()).eval();
}

Matrix covariance_square_root(const Matrix& cov) {
  if (!all_finite(cov)) {
    throw NumericalError("covariance not PSD: non-finite entries");
  }
  Matrix sym = cov;
  symmetrize(sym);

  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }

  // Semi-definite input (e.g. a zero block): pivoted LDL^T keeps it exact.
  const double scale = std::max(1.0, sym.diagonal().cwiseAbs().maxCoeff());
  Eigen::LDLT<Matrix> ldlt(sym);
  if (ldlt.info() == Eigen::Success) {
    Vector d = ldlt.vectorD();
    if (d.minCoeff() >= -1e-9 * scale) {
      d = d.cwiseMax(0.0);
      Matrix L = ldlt.matrixL();
      Matrix S = L * d.cwiseSqrt().asDiagonal();
      return ldlt.transpositionsP().transpose() * S;
    }
  }

  const auto n = sym.rows();
  for (double jitter = 1e-12; jitter <= 1e-6 * (1.0 + 1e-9); jitter *= 10.0) {
    Eigen::LLT<Matrix> jittered(sym + jitter * Matrix::Identity(n, n));
    if (jittered.info() == Eigen::Success) {
      return jittered.matrixL();
    }
  }
  throw NumericalError("covariance not PSD");
}

SigmaPointSet sigma_points(const GaussianBelief& belief,
                           const SigmaPointParams& params) {
  const Eigen::Index d = belief.dim();
  params.validate(d);
  if (belief.cov.rows() != d || belief.cov.cols() != d) {
    throw ContractError("belief covariance does not match mean dimension");
  }

  const double dd = static_cast<double>(d);
  const double c = params.alpha * params.alpha * (dd + params.kappa);
  const double lambda = c - dd;

  const Matrix S = std::sqrt(c) * covariance_square_root(belief.cov);

  SigmaPointSet set;
  set.points.resize(d, 2 * d + 1);
  set.points.col(0) = belief.mean;
  for (Eigen::Index i = 0; i < d; ++i) {
    set.points.col(1 + i) = belief.mean + S.col(i);
    set.points.col(1 + d + i) = belief.mean - S.col(i);
  }

  set.mean_weights = Vector::Constant(2 * d + 1, 0.5 / c);
  set.cov_weights = set.mean_weights;
  set.mean_weights(0) = lambda / c;
  set.cov_weights(0) =
      lambda / c + (1.0 - params.alpha * params.alpha + params.beta);
  return set;
}

GaussianBelief predict(const GaussianBelief& belief, const StateMap& dynamics,
                       const Matrix& Q, const SigmaPointParams& params,
                       long step) {
  const Eigen::Index d = belief.dim();
  if (Q.rows() != d || Q.cols() != d) {
    throw ContractError("process noise dimension mismatch");
  }
  const SigmaPointSet sp = sigma_points(belief, params);
  const auto n_points = sp.points.cols();

  Matrix propagated(d, n_points);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    Vector next = dynamics(sp.points.col(i));
    if (next.size() != d) {
      throw ContractError("dynamics map changed the state dimension");
    }
    if (!next.allFinite()) {
      throw DivergenceError(
          "dynamics diverged at step " + std::to_string(step), step);
    }
    propagated.col(i) = next;
  }

  GaussianBelief out;
  out.mean = propagated * sp.mean_weights;
  const Matrix centered = propagated.colwise() - out.mean;
  out.cov = centered * sp.cov_weights.asDiagonal() * centered.transpose() + Q;
  symmetrize(out.cov);
  return out;
}

UpdateResult update(const GaussianBelief& belief, const StateMap& observation,
                    const Vector& y, const Matrix& R,
                    const SigmaPointParams& params) {
  if (!y.allFinite()) {
    throw NumericalError("invalid measurement");
  }
  if (R.rows() != y.size() || R.cols() != y.size()) {
    throw ContractError("measurement noise dimension mismatch");
  }
  const SigmaPointSet sp = sigma_points(belief, params);
  const auto n_points = sp.points.cols();

  Matrix predicted(y.size(), n_points);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    Vector z = observation(sp.points.col(i));
    if (z.size() != y.size()) {
      throw ContractError("observation map output does not match measurement");
    }
    predicted.col(i) = z;
  }

  UpdateResult result;
  PredictedObservation& pred = result.predicted;
  pred.mu = predicted * sp.mean_weights;
  const Matrix dz = predicted.colwise() - pred.mu;
  const Matrix dx = sp.points.colwise() - belief.mean;
  pred.D = dz * sp.cov_weights.asDiagonal() * dz.transpose() + R;
  symmetrize(pred.D);
  const Matrix cross = dx * sp.cov_weights.asDiagonal() * dz.transpose();

  const Eigen::LLT<Matrix> llt = factor_innovation(pred.D);
  const Matrix gain = llt.solve(cross.transpose()).transpose();

  result.posterior.mean = belief.mean + gain * (y - pred.mu);
  result.posterior.cov = belief.cov - gain * cross.transpose();
  symmetrize(result.posterior.cov);
  return result;
}

double log_likelihood_increment(const Vector& y,
                                const PredictedObservation& pred) {
  if (y.size() != pred.mu.size()) {
    throw ContractError("measurement dimension mismatch");
  }
  const Eigen::LLT<Matrix> llt = factor_innovation(pred.D);
  const Vector innovation = y - pred.mu;
  const Matrix L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double mahalanobis = innovation.dot(llt.solve(innovation));
  return -log_det - mahalanobis;
}

}  // namespace skfnav
