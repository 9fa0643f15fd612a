#include "skfnav/bias_models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace skfnav {

std::string to_string(BiasKind kind) {
  switch (kind) {
    case BiasKind::Static:
      return "static";
    case BiasKind::Linear:
      return "linear";
    case BiasKind::Quadratic:
      return "quadratic";
  }
  return "quadratic";
}

BiasKind bias_kind_from_string(const std::string& name) {
  if (name == "static") return BiasKind::Static;
  if (name == "linear") return BiasKind::Linear;
  if (name == "quadratic") return BiasKind::Quadratic;
  throw ConfigError("unknown bias kind '" + name + "'");
}

int parameter_count(BiasKind kind) {
  switch (kind) {
    case BiasKind::Static:
      return 1;
    case BiasKind::Linear:
      return 2;
    case BiasKind::Quadratic:
      return 3;
  }
  return 3;
}

BiasSpec BiasSpec::uniform(BiasKind kind, BiasCoeffs coeffs, int n_channels,
                           std::optional<double> cap) {
  BiasSpec spec;
  spec.kind = kind;
  spec.channels.assign(static_cast<std::size_t>(n_channels), coeffs);
  spec.cap = cap;
  return spec;
}

void BiasSpec::validate() const {
  if (channels.empty()) {
    throw ConfigError("bias spec needs at least one channel");
  }
  for (const auto& c : channels) {
    if (!std::isfinite(c.A) || !std::isfinite(c.B) || !std::isfinite(c.C)) {
      throw ConfigError("bias coefficients must be finite");
    }
    if (kind == BiasKind::Static && (c.B != 0.0 || c.C != 0.0)) {
      throw ConfigError("static bias carries only A");
    }
    if (kind == BiasKind::Linear && c.C != 0.0) {
      throw ConfigError("linear bias carries only A and B");
    }
  }
  if (cap && !(*cap > 0.0)) {
    throw ConfigError("bias cap must be positive");
  }
}

bool BiasSpec::is_zero() const {
  return std::all_of(channels.begin(), channels.end(), [](const BiasCoeffs& c) {
    return c.A == 0.0 && c.B == 0.0 && c.C == 0.0;
  });
}

SwitchSpec SwitchSpec::at_step(long index, double dt) {
  return {static_cast<double>(index) * dt, index};
}

SwitchSpec SwitchSpec::at_time(double t_s, double dt) {
  // Tolerate representation error so that 2.0 / 0.01 lands on step 200.
  const double steps = t_s / dt;
  const double rounded = std::round(steps);
  const long index = std::abs(steps - rounded) < 1e-9
                         ? static_cast<long>(rounded)
                         : static_cast<long>(std::floor(steps));
  return {t_s, index};
}

bool bias_active(double t_s, double t_k) {
  const double eps = 1e-9 * std::max(1.0, std::abs(t_s));
  return t_k > t_s + eps;
}

Vector bias_eval(const BiasSpec& spec, double t_s, double t_k) {
  const double tau = t_k - t_s;
  if (tau < -1e-9 * std::max(1.0, std::abs(t_s))) {
    throw ContractError("bias_eval requires t_k >= t_s");
  }
  const double elapsed = std::max(tau, 0.0);
  Vector out(static_cast<Eigen::Index>(spec.channels.size()));
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    const auto& c = spec.channels[i];
    double value = c.A;
    if (spec.kind != BiasKind::Static) value += c.B * elapsed;
    if (spec.kind == BiasKind::Quadratic) value += c.C * elapsed * elapsed;
    if (spec.cap && std::abs(value) > *spec.cap) {
      value = std::copysign(*spec.cap, value);
    }
    out(static_cast<Eigen::Index>(i)) = value;
  }
  return out;
}

Vector observe(const Vector& x, const std::vector<int>& channels,
               const BiasSpec& spec, const SwitchSpec& sw, double t_k) {
  Vector y(static_cast<Eigen::Index>(channels.size()));
  for (std::size_t i = 0; i < channels.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = x(channels[i]);
  }
  if (bias_active(sw.t_s, t_k)) {
    if (spec.channels.size() != channels.size()) {
      throw ContractError("bias spec channel count does not match observation");
    }
    y += bias_eval(spec, sw.t_s, t_k);
  }
  return y;
}

int QuadraticBiasLayout::groups() const {
  if (group_of_channel.empty()) return 0;
  return *std::max_element(group_of_channel.begin(), group_of_channel.end()) + 1;
}

QuadraticBiasLayout QuadraticBiasLayout::per_channel(std::vector<int> observed,
                                                     int theta_offset) {
  QuadraticBiasLayout layout;
  layout.group_of_channel.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    layout.group_of_channel[i] = static_cast<int>(i);
  }
  layout.observed = std::move(observed);
  layout.theta_offset = theta_offset;
  return layout;
}

QuadraticBiasLayout QuadraticBiasLayout::shared(std::vector<int> observed,
                                                int theta_offset) {
  QuadraticBiasLayout layout;
  layout.group_of_channel.assign(observed.size(), 0);
  layout.observed = std::move(observed);
  layout.theta_offset = theta_offset;
  return layout;
}

Vector nominal_observation(const Vector& x_aug,
                           const QuadraticBiasLayout& layout) {
  Vector y(static_cast<Eigen::Index>(layout.observed.size()));
  for (std::size_t i = 0; i < layout.observed.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = x_aug(layout.observed[i]);
  }
  return y;
}

Vector corrupted_observation(const Vector& x_aug,
                             const QuadraticBiasLayout& layout, double tau) {
  Vector y = nominal_observation(x_aug, layout);
  for (std::size_t i = 0; i < layout.observed.size(); ++i) {
    const int base = layout.theta_offset + 3 * layout.group_of_channel[i];
    double b = x_aug(base) + x_aug(base + 1) * tau + x_aug(base + 2) * tau * tau;
    if (layout.cap && std::abs(b) > *layout.cap) b = std::copysign(*layout.cap, b);
    y(static_cast<Eigen::Index>(i)) += b;
  }
  return y;
}

Augmented augment(const Vector& x, const Vector& theta_prior_mean,
                  const Matrix& Q_x, double q_p) {
  if (q_p < 0.0) {
    throw ConfigError("parameter process noise must be non-negative");
  }
  if (Q_x.rows() != x.size() || Q_x.cols() != x.size()) {
    throw ConfigError("state process noise does not match state dimension");
  }
  const Eigen::Index n = x.size();
  const Eigen::Index p = theta_prior_mean.size();
  Augmented out;
  out.state.resize(n + p);
  out.state << x, theta_prior_mean;
  out.Q = Matrix::Zero(n + p, n + p);
  out.Q.topLeftCorner(n, n) = Q_x;
  out.Q.bottomRightCorner(p, p) = q_p * Matrix::Identity(p, p);
  return out;
}

StateMap augment_dynamics(StateMap dynamics, Eigen::Index state_dim) {
  return [dynamics = std::move(dynamics), state_dim](const Vector& x_aug) {
    Vector out = x_aug;
    out.head(state_dim) = dynamics(x_aug.head(state_dim));
    return out;
  };
}

void to_json(nlohmann::json& j, const BiasSpec& spec) {
  j = nlohmann::json::object();
  j["kind"] = to_string(spec.kind);
  const bool uniform = std::all_of(
      spec.channels.begin(), spec.channels.end(), [&](const BiasCoeffs& c) {
        return c.A == spec.channels.front().A && c.B == spec.channels.front().B &&
               c.C == spec.channels.front().C;
      });
  if (uniform && !spec.channels.empty()) {
    j["A"] = spec.channels.front().A;
    j["B"] = spec.channels.front().B;
    j["C"] = spec.channels.front().C;
  } else {
    auto& a = j["A"] = nlohmann::json::array();
    auto& b = j["B"] = nlohmann::json::array();
    auto& c = j["C"] = nlohmann::json::array();
    for (const auto& ch : spec.channels) {
      a.push_back(ch.A);
      b.push_back(ch.B);
      c.push_back(ch.C);
    }
  }
  if (spec.cap) j["cap"] = *spec.cap;
}

namespace {

std::vector<double> coefficient_list(const nlohmann::json& j, const char* key,
                                     int n_channels) {
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::vector<double>(static_cast<std::size_t>(n_channels), 0.0);
  }
  const auto& v = j.at(key);
  if (v.is_number()) {
    return std::vector<double>(static_cast<std::size_t>(n_channels),
                               v.get<double>());
  }
  if (v.is_array()) {
    if (static_cast<int>(v.size()) != n_channels) {
      throw ConfigError(std::string("bias coefficient '") + key + "' needs " +
                        std::to_string(n_channels) + " entries");
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) {
        throw ConfigError(std::string("bias coefficient '") + key +
                          "' must be numeric");
      }
      out.push_back(e.get<double>());
    }
    return out;
  }
  throw ConfigError(std::string("bias coefficient '") + key +
                    "' must be a number or an array");
}

}  // namespace

BiasSpec bias_spec_from_json(const nlohmann::json& j, int n_channels) {
  if (!j.is_object()) {
    throw ConfigError("bias must be a JSON object");
  }
  static const std::set<std::string> known = {"kind", "A", "B", "C", "cap"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("unknown bias field '" + item.key() + "'");
    }
  }
  BiasSpec spec;
  spec.kind = bias_kind_from_string(j.value("kind", std::string("quadratic")));
  const auto a = coefficient_list(j, "A", n_channels);
  const auto b = coefficient_list(j, "B", n_channels);
  const auto c = coefficient_list(j, "C", n_channels);
  for (int i = 0; i < n_channels; ++i) {
    spec.channels.push_back({a[i], b[i], c[i]});
  }
  if (j.contains("cap") && !j.at("cap").is_null()) {
    if (!j.at("cap").is_number()) throw ConfigError("bias cap must be numeric");
    spec.cap = j.at("cap").get<double>();
  }
  spec.validate();
  return spec;
}

}  // namespace skfnav
