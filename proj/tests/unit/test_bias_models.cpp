#include <gtest/gtest.h>

#include <json.hpp>

#include "skfnav/bias_models.hpp"

namespace skfnav {
namespace {

TEST(BiasEval, QuadraticAtOnset) {
  const auto spec = BiasSpec::uniform(BiasKind::Quadratic, {0.1, 0.0, 0.01}, 1);
  EXPECT_NEAR(bias_eval(spec, 2.0, 2.0 + 1e-6)(0), 0.1, 1e-9);
}

TEST(BiasEval, ZeroParametersGiveZero) {
  for (auto kind : {BiasKind::Static, BiasKind::Linear, BiasKind::Quadratic}) {
    const auto spec = BiasSpec::uniform(kind, {}, 2);
    for (double t : {0.5, 3.0, 100.0}) EXPECT_EQ(bias_eval(spec, 0.0, t).norm(), 0.0);
  }
}

TEST(BiasEval, KindsIgnoreHigherOrderTerms) {
  const BiasCoeffs c{1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(bias_eval(BiasSpec::uniform(BiasKind::Static, c, 1), 0.0, 2.0)(0), 1.0);
  EXPECT_DOUBLE_EQ(bias_eval(BiasSpec::uniform(BiasKind::Linear, c, 1), 0.0, 2.0)(0), 5.0);
  EXPECT_DOUBLE_EQ(bias_eval(BiasSpec::uniform(BiasKind::Quadratic, c, 1), 0.0, 2.0)(0), 17.0);
}

TEST(BiasEval, CapSaturates) {
  const auto spec = BiasSpec::uniform(BiasKind::Quadratic, {0.0, 0.0, 1.0}, 3, 1000.0);
  const Vector b = bias_eval(spec, 0.0, 40.0);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(b(i), 1000.0);
}

TEST(BiasEval, CapIsMonotoneAndPreservesSign) {
  const auto capped = BiasSpec::uniform(BiasKind::Quadratic, {-5.0, -3.0, 0.0}, 1, 20.0);
  const auto raw = BiasSpec::uniform(BiasKind::Quadratic, {-5.0, -3.0, 0.0}, 1);
  for (double tau = 0.1; tau < 20.0; tau += 0.37) {
    const double c = bias_eval(capped, 0.0, tau)(0);
    const double r = bias_eval(raw, 0.0, tau)(0);
    EXPECT_LE(std::abs(c), 20.0);
    if (std::abs(r) < 20.0) EXPECT_DOUBLE_EQ(c, r);
    else EXPECT_DOUBLE_EQ(c, -20.0);
  }
}

TEST(BiasEval, ActiveStrictlyAfterSwitch) {
  EXPECT_FALSE(bias_active(2.0, 1.0));
  EXPECT_FALSE(bias_active(2.0, 2.0));
  EXPECT_TRUE(bias_active(2.0, 2.01));
}

TEST(BiasSpec, ValidationRejectsBadCap) {
  auto spec = BiasSpec::uniform(BiasKind::Static, {1.0, 0.0, 0.0}, 1, 0.0);
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(BiasSpec, JsonRoundTrip) {
  const auto j = nlohmann::json::parse(R"({"kind":"linear","A":1,"B":2,"cap":50})");
  const BiasSpec spec = bias_spec_from_json(j, 3);
  EXPECT_EQ(spec.kind, BiasKind::Linear);
  ASSERT_EQ(spec.channels.size(), 3u);
  EXPECT_DOUBLE_EQ(spec.channels[2].B, 2.0);
  nlohmann::json out;
  to_json(out, spec);
  const BiasSpec back = bias_spec_from_json(out, 3);
  EXPECT_DOUBLE_EQ(back.channels[0].A, 1.0);
  EXPECT_DOUBLE_EQ(*back.cap, 50.0);
}

TEST(BiasSpec, JsonRejectsUnknownKind) {
  EXPECT_THROW(bias_spec_from_json(nlohmann::json::parse(R"({"kind":"cubic"})"), 1),
               ConfigError);
}

TEST(Observe, BoundaryIsNominal) {
  Vector x(2);
  x << -35.0, 25.0;
  const auto spec = BiasSpec::uniform(BiasKind::Static, {0.2, 0.0, 0.0}, 2);
  const auto sw = SwitchSpec::at_step(200, 0.01);
  EXPECT_LT((observe(x, {0, 1}, spec, sw, 2.0) - x).norm(), 1e-15);
  EXPECT_NEAR(observe(x, {0, 1}, spec, sw, 2.01)(0), -34.8, 1e-12);
}

TEST(Observe, UnbiasedBalloonIsSelection) {
  Vector x(2);
  x << -35.0, 25.0;
  const auto spec = BiasSpec::uniform(BiasKind::Quadratic, {}, 2);
  EXPECT_EQ(observe(x, {0, 1}, spec, SwitchSpec::at_step(0, 0.01), 3.0), x);
}

TEST(Observe, ShuttleStaticOffset) {
  Vector x = Vector::Zero(15);
  x(0) = 1.5e5;
  x(1) = 0.93;
  x(2) = 0.32;
  const auto spec = BiasSpec::uniform(BiasKind::Static, {100.0, 0.0, 0.0}, 3, 1000.0);
  const Vector y = observe(x, {0, 1, 2}, spec, SwitchSpec::at_time(500.0, 1.4), 510.0);
  EXPECT_DOUBLE_EQ(y(0), 1.5e5 + 100.0);
}

TEST(Layout, NominalAndCorruptedMaps) {
  const auto layout = QuadraticBiasLayout::shared({0, 1}, 2);
  EXPECT_EQ(layout.theta_dim(), 3);
  Vector x(5);
  x << -35.0, 25.0, 0.1, 0.2, 0.3;
  EXPECT_EQ(nominal_observation(x, layout), x.head(2));
  const Vector y = corrupted_observation(x, layout, 2.0);
  EXPECT_NEAR(y(0), -35.0 + 0.1 + 0.4 + 1.2, 1e-12);
  EXPECT_NEAR(y(1), 25.0 + 0.1 + 0.4 + 1.2, 1e-12);
}

TEST(Layout, PerChannelCapApplies) {
  auto layout = QuadraticBiasLayout::per_channel({0, 1}, 2);
  layout.cap = 10.0;
  EXPECT_EQ(layout.theta_dim(), 6);
  Vector x = Vector::Zero(8);
  x(2) = 100.0;
  x(5) = -1.0;
  const Vector y = corrupted_observation(x, layout, 1.0);
  EXPECT_DOUBLE_EQ(y(0), 10.0);
  EXPECT_DOUBLE_EQ(y(1), -1.0);
}

TEST(Augment, BalloonPattern) {
  const auto aug = augment(Vector::Zero(2), Vector::Zero(3), 1e-4 * Matrix::Identity(2, 2), 1e-6);
  ASSERT_EQ(aug.Q.rows(), 5);
  Matrix expected = Matrix::Zero(5, 5);
  expected.diagonal() << 1e-4, 1e-4, 1e-6, 1e-6, 1e-6;
  EXPECT_EQ(aug.Q, expected);
}

TEST(Augment, ZeroParameterNoise) {
  const auto aug = augment(Vector::Zero(2), Vector::Zero(3), Matrix::Identity(2, 2), 0.0);
  EXPECT_EQ(aug.Q.bottomRightCorner(3, 3).norm(), 0.0);
}

TEST(Augment, ShuttleDimension) {
  const auto layout = QuadraticBiasLayout::per_channel({0, 1, 2}, 15);
  const auto aug = augment(Vector::Zero(15), Vector::Zero(layout.theta_dim()),
                           Matrix::Identity(15, 15), 1e-12);
  EXPECT_EQ(aug.state.size(), 24);
}

TEST(Augment, DynamicsCarriesThetaUnchanged) {
  const StateMap f = [](const Vector& x) { return Vector(2.0 * x); };
  const StateMap g = augment_dynamics(f, 2);
  Vector x(4);
  x << 1.0, 2.0, 3.0, 4.0;
  const Vector y = g(x);
  EXPECT_DOUBLE_EQ(y(0), 2.0);
  EXPECT_DOUBLE_EQ(y(1), 4.0);
  EXPECT_DOUBLE_EQ(y(2), 3.0);
  EXPECT_DOUBLE_EQ(y(3), 4.0);
}

}  // namespace
}  // namespace skfnav
