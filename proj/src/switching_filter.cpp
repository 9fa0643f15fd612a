#include "skfnav/switching_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "skfnav/io.hpp"

namespace skfnav {

void BranchHistory::append(long step, double time, double logL,
                           const GaussianBelief& b) {
  if (dim == 0) dim = b.dim();
  steps.push_back(step);
  times.push_back(time);
  log_likelihoods.push_back(logL);
  means.insert(means.end(), b.mean.data(), b.mean.data() + b.mean.size());
  const Vector var = b.cov.diagonal();
  variances.insert(variances.end(), var.data(), var.data() + var.size());
}

Vector BranchHistory::mean_at(std::size_t i) const {
  return Eigen::Map<const Vector>(means.data() + i * dim, dim);
}

Vector BranchHistory::variance_at(std::size_t i) const {
  return Eigen::Map<const Vector>(variances.data() + i * dim, dim);
}

void SwitchingFilterConfig::validate() const {
  if (capacity < 2) throw ConfigError("branch capacity M must be at least 2");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (delta < 1) throw ConfigError("sampling period delta must be >= 1");
}

BranchSet init(const Vector& x0, const Matrix& C0, int d_theta,
               const SwitchingFilterConfig& config, double theta_var) {
  config.validate();
  if (C0.rows() != x0.size() || C0.cols() != x0.size()) {
    throw ConfigError("initial covariance does not match initial state");
  }
  if (d_theta < 0) throw ConfigError("parameter dimension must be >= 0");
  if (!(theta_var >= 0.0)) throw ConfigError("parameter variance must be >= 0");

  const Eigen::Index n = x0.size();
  BranchSet set;
  set.capacity = config.capacity;
  Branch& nominal = set.nominal;
  nominal.nominal = true;
  nominal.belief.mean = Vector::Zero(n + d_theta);
  nominal.belief.mean.head(n) = x0;
  nominal.belief.cov = Matrix::Zero(n + d_theta, n + d_theta);
  nominal.belief.cov.topLeftCorner(n, n) = C0;
  nominal.belief.cov.bottomRightCorner(d_theta, d_theta) =
      theta_var * Matrix::Identity(d_theta, d_theta);
  symmetrize(nominal.belief.cov);
  return set;
}

BranchSet predict_all(BranchSet set, const StateMap& dynamics,
                      const Matrix& Q_aug, const SigmaPointParams& params,
                      long step) {
  auto run = [&](Branch& b) {
    try {
      b.belief = predict(b.belief, dynamics, Q_aug, params, step);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " (branch t_s=" +
                                io::format_double(b.t_s) + ")",
                            e.step());
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (branch t_s=" +
                           io::format_double(b.t_s) + ", step " +
                           std::to_string(step) + ")");
    }
  };
  run(set.nominal);
  for (auto& b : set.corrupted) run(b);
  return set;
}

namespace {

void update_branch(Branch& b, const StateMap& h, const Vector& y,
                   const Matrix& R, const SigmaPointParams& params, long k) {
  auto result = update(b.belief, h, y, R, params);
  b.logL += log_likelihood_increment(y, result.predicted);
  b.belief = std::move(result.posterior);
  if (!std::isfinite(b.logL)) {
    throw NumericalError("non-finite log-likelihood at step " + std::to_string(k));
  }
}

// Runs `op` on a live branch; a numerical or domain failure retires it.
template <typename Op>
void guarded(Branch& b, long k, const StepHooks* hooks, Op op) {
  if (b.failed) return;
  try {
    op(b);
  } catch (const NumericalError& e) {
    b.failure = e.what();
    b.failed = true;
  } catch (const DomainError& e) {
    b.failure = e.what();
    b.failed = true;
  }
  if (b.failed) {
    b.logL = -std::numeric_limits<double>::infinity();
    if (hooks && hooks->on_failure) hooks->on_failure(k, b);
  }
}

void drop_failed(BranchSet& set) {
  set.corrupted.erase(std::remove_if(set.corrupted.begin(), set.corrupted.end(),
                                     [](const Branch& b) { return b.failed; }),
                      set.corrupted.end());
}

// Strict weak order: "a is removed before b".
bool prune_before(const Branch& a, const Branch& b) {
  if (a.logL != b.logL) return a.logL < b.logL;
  return a.t_s > b.t_s;
}

}  // namespace

BranchSet step(BranchSet set, long k, const std::optional<Vector>& y,
               const StepModel& model, const SwitchingFilterConfig& config,
               const StepHooks* hooks) {
  const double t_k = static_cast<double>(k) * config.dt;
  const auto predict_one = [&](Branch& b) {
    b.belief = predict(b.belief, model.dynamics, model.Q_aug, config.ukf, k);
  };
  guarded(set.nominal, k, hooks, predict_one);
  for (auto& b : set.corrupted) guarded(b, k, hooks, predict_one);
  drop_failed(set);

  if (y) {
    if (model.layout == nullptr) {
      throw ContractError("step needs an observation layout");
    }
    const auto& layout = *model.layout;
    if (y->size() != static_cast<Eigen::Index>(layout.observed.size())) {
      throw ContractError("measurement dimension mismatch at step " +
                          std::to_string(k));
    }

    // The split hypothesises a switch right after the previous epoch.
    std::optional<Branch> spawned;
    if (!set.nominal.failed) {
      spawned = set.nominal;
      spawned->nominal = false;
      spawned->s_index = std::max<long>(0, k - config.delta);
      spawned->t_s = static_cast<double>(spawned->s_index) * config.dt;
      if (hooks && hooks->on_spawn) hooks->on_spawn(k, *spawned, set.nominal);
    }

    const StateMap nominal_h = [&layout](const Vector& x) {
      return nominal_observation(x, layout);
    };
    guarded(set.nominal, k, hooks, [&](Branch& b) {
      update_branch(b, nominal_h, *y, model.R, config.ukf, k);
    });

    if (spawned) set.corrupted.push_back(std::move(*spawned));
    for (auto& b : set.corrupted) {
      const double tau = t_k - b.t_s;
      const StateMap corrupted_h = [&layout, tau](const Vector& x) {
        return corrupted_observation(x, layout, tau);
      };
      guarded(b, k, hooks, [&](Branch& br) {
        update_branch(br, corrupted_h, *y, model.R, config.ukf, k);
      });
    }
    drop_failed(set);
    set = prune(std::move(set), k, hooks);
  }

  if (set.nominal.failed && set.corrupted.empty()) {
    throw NumericalError("every branch failed by step " + std::to_string(k) +
                         ": " + set.nominal.failure);
  }

  const auto record = [&](Branch& b) {
    if (config.history == HistoryMode::CurrentOnly) {
      b.history = BranchHistory{};
    }
    b.history.append(k, t_k, b.logL, b.belief);
  };
  record(set.nominal);
  for (auto& b : set.corrupted) record(b);
  return set;
}

BranchSet prune(BranchSet set, long step, const StepHooks* hooks) {
  const std::size_t keep =
      static_cast<std::size_t>(std::max(set.capacity - 1, 0));
  while (set.corrupted.size() > keep) {
    auto victim = std::min_element(set.corrupted.begin(), set.corrupted.end(),
                                   prune_before);
    if (hooks && hooks->on_prune) {
      PruneEvent ev;
      ev.step = step;
      ev.removed_t_s = victim->t_s;
      ev.removed_logL = victim->logL;
      ev.min_logL = std::numeric_limits<double>::infinity();
      for (const auto& b : set.corrupted) ev.min_logL = std::min(ev.min_logL, b.logL);
      ev.remaining = set.corrupted.size() - 1;
      hooks->on_prune(ev);
    }
    set.corrupted.erase(victim);
  }
  return set;
}

Estimate estimate(const BranchSet& set) {
  Estimate est;
  est.best_logL = set.nominal.logL;
  for (std::size_t i = 0; i < set.corrupted.size(); ++i) {
    const Branch& b = set.corrupted[i];
    if (b.logL > est.best_logL) {
      est.best_logL = b.logL;
      est.nominal_best = false;
      est.best_index = i;
    }
  }
  if (!est.nominal_best) {
    const Branch& best = set.corrupted[est.best_index];
    est.switch_time = best.t_s;
    est.switch_index = best.s_index;
  }

  est.weights.reserve(set.total());
  est.weights.push_back(std::exp(set.nominal.logL - est.best_logL));
  for (const auto& b : set.corrupted) {
    est.weights.push_back(std::exp(b.logL - est.best_logL));
  }
  if (!std::isfinite(est.best_logL)) {
    std::fill(est.weights.begin(), est.weights.end(), 1.0);
  }
  double total = 0.0;
  for (double w : est.weights) total += w;
  for (double& w : est.weights) w /= total;
  return est;
}

const Branch& best_branch(const BranchSet& set, const Estimate& est) {
  return est.nominal_best ? set.nominal : set.corrupted.at(est.best_index);
}

GaussianBelief model_average(const std::vector<GaussianBelief>& beliefs,
                             const std::vector<double>& weights) {
  if (beliefs.empty() || beliefs.size() != weights.size()) {
    throw ContractError("model_average needs one weight per belief");
  }
  const Eigen::Index d = beliefs.front().dim();
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ContractError("model_average weights sum to zero");

  GaussianBelief out;
  out.mean = Vector::Zero(d);
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    if (beliefs[i].dim() != d) {
      throw ContractError("model_average beliefs differ in dimension");
    }
    out.mean += (weights[i] / total) * beliefs[i].mean;
  }
  out.cov = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const Vector dm = beliefs[i].mean - out.mean;
    out.cov += (weights[i] / total) * (beliefs[i].cov + dm * dm.transpose());
  }
  symmetrize(out.cov);
  return out;
}

GaussianBelief model_average(const BranchSet& set) {
  const Estimate est = estimate(set);
  std::vector<GaussianBelief> beliefs;
  beliefs.push_back(set.nominal.belief);
  for (const auto& b : set.corrupted) beliefs.push_back(b.belief);
  return model_average(beliefs, est.weights);
}

std::string branch_trajectory_csv(const BranchSet& set,
                                  const std::vector<std::string>& state_names) {
  std::ostringstream out;
  std::vector<std::string> header = {"step", "time", "branch_t_s", "nominal", "logL"};
  for (const auto& n : state_names) header.push_back("mean_" + n);
  for (const auto& n : state_names) header.push_back("var_" + n);
  out << io::join(header) << '\n';

  auto emit = [&](const Branch& b) {
    const auto& h = b.history;
    const auto d = static_cast<std::size_t>(h.dim);
    if (d != 0 && d != state_names.size()) {
      throw ContractError("state name count does not match branch dimension");
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
      std::vector<std::string> row = {
          std::to_string(h.steps[i]), io::format_double(h.times[i]),
          io::format_double(b.t_s), b.nominal ? "1" : "0",
          io::format_double(h.log_likelihoods[i])};
      for (std::size_t j = 0; j < d; ++j) row.push_back(io::format_double(h.means[i * d + j]));
      for (std::size_t j = 0; j < d; ++j) row.push_back(io::format_double(h.variances[i * d + j]));
      out << io::join(row) << '\n';
    }
  };
  emit(set.nominal);
  for (const auto& b : set.corrupted) emit(b);
  return out.str();
}

}  // namespace skfnav
