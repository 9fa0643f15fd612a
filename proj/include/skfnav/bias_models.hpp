#pragma once

// Parametric corruption models for the observation channel, the switched
// observation model (nominal before the switch, nominal + bias after it) and
// the parameter-augmentation helpers used by the switching filter.

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "skfnav/gaussian_filter.hpp"

namespace skfnav {

enum class BiasKind { Static, Linear, Quadratic };

std::string to_string(BiasKind kind);
BiasKind bias_kind_from_string(const std::string& name);

/// Number of parameters a bias kind carries per channel (1, 2 or 3).
int parameter_count(BiasKind kind);

struct BiasCoeffs {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
};

/// Truth-side corruption model. One coefficient triple per observed channel;
/// coefficients beyond the kind's order must be zero. `cap` limits the bias
/// magnitude per channel, sign preserved.
struct BiasSpec {
  BiasKind kind = BiasKind::Quadratic;
  std::vector<BiasCoeffs> channels;
  std::optional<double> cap;

  /// Same coefficients broadcast to `n_channels` channels.
  static BiasSpec uniform(BiasKind kind, BiasCoeffs coeffs, int n_channels,
                          std::optional<double> cap = std::nullopt);

  void validate() const;
  [[nodiscard]] bool is_zero() const;
};

/// Time at which the observation model switches, and its step index.
/// Off-grid switch times are allowed; `s_index` is then the last step at or
/// before `t_s`.
struct SwitchSpec {
  double t_s = 0.0;
  long s_index = 0;

  static SwitchSpec at_step(long index, double dt);
  static SwitchSpec at_time(double t_s, double dt);
};

/// True when the corrupted branch of the switched model applies, i.e.
/// t_k > t_s. Equality counts as "not yet switched".
bool bias_active(double t_s, double t_k);

/// H_b(theta, t_s, t_k) per channel. Throws ContractError if t_k < t_s.
Vector bias_eval(const BiasSpec& spec, double t_s, double t_k);

/// Switched observation: selection of `channels` from x, plus the bias once
/// t_k > t_s.
Vector observe(const Vector& x, const std::vector<int>& channels,
               const BiasSpec& spec, const SwitchSpec& sw, double t_k);

/// Learned corruption model: always quadratic. `group_of_channel[c]` picks
/// which (A, B, C) triple in the augmented tail drives channel c, so several
/// channels may share one triple.
struct QuadraticBiasLayout {
  std::vector<int> observed;          // indices of the observed state entries
  std::vector<int> group_of_channel;  // per observed channel
  int theta_offset = 0;               // start of theta in the augmented state
  std::optional<double> cap;          // known saturation of the corruption

  [[nodiscard]] int groups() const;
  [[nodiscard]] int theta_dim() const { return 3 * groups(); }

  /// One triple per channel.
  static QuadraticBiasLayout per_channel(std::vector<int> observed,
                                         int theta_offset);
  /// A single triple shared by every channel.
  static QuadraticBiasLayout shared(std::vector<int> observed,
                                    int theta_offset);
};

/// Nominal observation H-bar on the augmented state.
Vector nominal_observation(const Vector& x_aug, const QuadraticBiasLayout& layout);

/// Corrupted observation H-tilde on the augmented state with elapsed time
/// tau = t_k - t_s since the hypothesised switch.
Vector corrupted_observation(const Vector& x_aug,
                             const QuadraticBiasLayout& layout, double tau);

struct Augmented {
  Vector state;
  Matrix Q;
};

/// [x, theta_prior_mean] with block-diagonal process noise diag(Q_x, q_p I).
Augmented augment(const Vector& x, const Vector& theta_prior_mean,
                  const Matrix& Q_x, double q_p);

/// Wraps a state-only dynamics map so that the parameter tail is carried
/// through unchanged.
StateMap augment_dynamics(StateMap dynamics, Eigen::Index state_dim);

void to_json(nlohmann::json& j, const BiasSpec& spec);
/// Accepts {"kind", "A", "B", "C", "cap"}; A/B/C may be scalars (broadcast to
/// `n_channels`) or per-channel arrays.
BiasSpec bias_spec_from_json(const nlohmann::json& j, int n_channels);

}  // namespace skfnav
