#include <gtest/gtest.h>

#include <cmath>

#include "skfnav/gaussian_filter.hpp"

namespace skfnav {
namespace {

GaussianBelief belief(const Vector& mean, const Matrix& cov) { return {mean, cov}; }

TEST(SigmaPoints, ScalarTextbookPoints) {
  const auto set = sigma_points(belief(Vector::Zero(1), Matrix::Identity(1, 1)),
                                {1.0, 0.0, 2.0});
  ASSERT_EQ(set.points.cols(), 3);
  EXPECT_NEAR(set.points(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(set.points(0, 1), std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(set.points(0, 2), -std::sqrt(3.0), 1e-12);
}

TEST(SigmaPoints, ZeroCovarianceCollapsesToMean) {
  Vector m(3);
  m << 1.0, -2.0, 0.5;
  const auto set = sigma_points(belief(m, Matrix::Zero(3, 3)), {});
  ASSERT_EQ(set.points.cols(), 7);
  for (Eigen::Index i = 0; i < set.points.cols(); ++i) {
    EXPECT_LT((set.points.col(i) - m).norm(), 1e-15);
  }
}

TEST(SigmaPoints, MomentsReconstructed) {
  Vector m(2);
  m << 1.0, 2.0;
  const auto set = sigma_points(belief(m, Matrix::Identity(2, 2)), {});
  const Vector mean = set.points * set.mean_weights;
  EXPECT_LT((mean - m).norm(), 1e-12);
  Matrix cov = Matrix::Zero(2, 2);
  for (Eigen::Index i = 0; i < set.points.cols(); ++i) {
    const Vector d = set.points.col(i) - mean;
    cov += set.cov_weights(i) * d * d.transpose();
  }
  EXPECT_LT((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SigmaPoints, RejectsBadParameters) {
  EXPECT_THROW(sigma_points(belief(Vector::Zero(1), Matrix::Identity(1, 1)), {0.0, 2.0, 0.0}),
               ConfigError);
}

TEST(CovarianceSquareRoot, FallsBackOnSemidefinite) {
  Matrix c(2, 2);
  c << 1.0, 1.0, 1.0, 1.0;
  const Matrix s = covariance_square_root(c);
  EXPECT_LT((s * s.transpose() - c).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CovarianceSquareRoot, RejectsIndefinite) {
  Matrix c(2, 2);
  c << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(covariance_square_root(c), NumericalError);
}

TEST(Predict, IdentityDynamicsLeavesBeliefUnchanged) {
  Vector m(2);
  m << 0.3, -0.7;
  Matrix c(2, 2);
  c << 2.0, 0.4, 0.4, 1.0;
  const auto out = predict(belief(m, c), [](const Vector& x) { return x; },
                           Matrix::Zero(2, 2), {});
  EXPECT_LT((out.mean - m).norm(), 1e-12);
  EXPECT_LT((out.cov - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predict, LinearDynamicsMatchesKalman) {
  const double dt = 0.1;
  Matrix A(2, 2);
  A << 1.0, dt, 0.0, 1.0;
  Vector m(2);
  m << 1.0, 2.0;
  Matrix c(2, 2);
  c << 0.5, 0.1, 0.1, 0.2;
  Matrix Q = 1e-3 * Matrix::Identity(2, 2);
  const auto out = predict(belief(m, c), [&A](const Vector& x) { return Vector(A * x); }, Q, {});
  EXPECT_LT((out.mean - A * m).norm(), 1e-9);
  EXPECT_LT((out.cov - (A * c * A.transpose() + Q)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Predict, NonFiniteDynamicsRaisesDivergence) {
  const StateMap bad = [](const Vector& x) {
    Vector y = x;
    y(0) = std::nan("");
    return y;
  };
  EXPECT_THROW(predict(belief(Vector::Zero(1), Matrix::Identity(1, 1)), bad,
                       Matrix::Zero(1, 1), {}, 7),
               DivergenceError);
}

TEST(Update, UninformativeMeasurementKeepsPrior) {
  Vector m(2);
  m << 1.0, -1.0;
  const Matrix c = Matrix::Identity(2, 2);
  Vector y(2);
  y << 5.0, 5.0;
  const auto out = update(belief(m, c), [](const Vector& x) { return x; }, y,
                          1e12 * Matrix::Identity(2, 2), {});
  EXPECT_LT((out.posterior.mean - m).norm() / m.norm(), 1e-3);
  EXPECT_LT((out.posterior.cov - c).norm() / c.norm(), 1e-3);
}

TEST(Update, ScalarMatchesKalmanGain) {
  Vector m(1);
  m << 2.0;
  Matrix c(1, 1);
  c << 3.0;
  Vector y(1);
  y << 4.0;
  Matrix R(1, 1);
  R << 0.5;
  const auto out = update(belief(m, c), [](const Vector& x) { return x; }, y, R, {});
  const double K = 3.0 / 3.5;
  EXPECT_NEAR(out.posterior.mean(0), 2.0 + K * 2.0, 1e-9);
  EXPECT_NEAR(out.posterior.cov(0, 0), (1.0 - K) * 3.0, 1e-9);
  EXPECT_NEAR(out.predicted.mu(0), 2.0, 1e-9);
  EXPECT_NEAR(out.predicted.D(0, 0), 3.5, 1e-9);
}

TEST(Update, UnobservedBlockUnchanged) {
  Vector m(3);
  m << 1.0, 0.2, -0.4;
  const Matrix c = Matrix::Identity(3, 3);
  Vector y(1);
  y << 3.0;
  const auto out = update(belief(m, c),
                          [](const Vector& x) { return Vector(x.head(1)); }, y,
                          0.1 * Matrix::Identity(1, 1), {});
  EXPECT_NEAR(out.posterior.mean(1), 0.2, 1e-10);
  EXPECT_NEAR(out.posterior.mean(2), -0.4, 1e-10);
}

TEST(LogLikelihood, Examples) {
  PredictedObservation p{Vector::Zero(1), Matrix::Identity(1, 1)};
  EXPECT_NEAR(log_likelihood_increment(Vector::Zero(1), p), 0.0, 1e-15);
  Vector y(1);
  y << 2.0;
  EXPECT_NEAR(log_likelihood_increment(y, p), -4.0, 1e-12);
  PredictedObservation q{Vector::Zero(2), std::exp(1.0) * Matrix::Identity(2, 2)};
  EXPECT_NEAR(log_likelihood_increment(Vector::Zero(2), q), -2.0, 1e-12);
}

TEST(LogLikelihood, RejectsSingularInnovation) {
  PredictedObservation p{Vector::Zero(1), Matrix::Zero(1, 1)};
  EXPECT_THROW(log_likelihood_increment(Vector::Zero(1), p), NumericalError);
}

}  // namespace
}  // namespace skfnav
