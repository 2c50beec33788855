#include "adamcb/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

#include "adamcb/errors.hpp"

namespace adamcb {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kAdam: return "adam";
    case Variant::kAdamX: return "adamx";
    case Variant::kAdamBS: return "adambs";
    case Variant::kAdamCB: return "adamcb";
  }
  throw ContractError("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "adam") return Variant::kAdam;
  if (name == "adamx") return Variant::kAdamX;
  if (name == "adambs") return Variant::kAdamBS;
  if (name == "adamcb") return Variant::kAdamCB;
  throw ConfigError("unknown optimizer variant '" + name +
                    "' (expected adam, adamx, adambs or adamcb)");
}

void validate_optimizer_config(const OptimizerConfig& cfg, int n) {
  if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(cfg.lambda > 0.0 && cfg.lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (cfg.alpha_mode == AlphaSchedule::kInverseSqrt &&
      cfg.beta1 / std::sqrt(cfg.beta2) > 1.0) {
    throw ConfigError("the decaying step schedule requires beta1 <= sqrt(beta2)");
  }
  const bool bandit_variant =
      cfg.variant == Variant::kAdamBS || cfg.variant == Variant::kAdamCB;
  validate_bandit_config(cfg.bandit, n, /*require_positive_gamma=*/bandit_variant);
}

MomentState MomentState::zeros(int dim) {
  MomentState s;
  s.m.assign(dim, 0.0);
  s.v.assign(dim, 0.0);
  s.v_hat.assign(dim, 0.0);
  s.t = 0;
  return s;
}

double beta1_schedule(double beta1, double lambda, int t) {
  if (t < 1) throw ContractError("beta1_schedule: t starts at 1");
  return beta1 * std::pow(lambda, t - 1);
}

double alpha_schedule(double alpha, int t, AlphaSchedule mode) {
  if (t < 1) throw ContractError("alpha_schedule: t starts at 1");
  switch (mode) {
    case AlphaSchedule::kConstant: return alpha;
    case AlphaSchedule::kInverseSqrt: return alpha / std::sqrt(static_cast<double>(t));
  }
  throw ContractError("alpha_schedule: unknown mode");
}

MomentState adamx_moment_update(const MomentState& state, const std::vector<double>& g,
                                const OptimizerConfig& cfg, int t) {
  if (t != state.t + 1) throw ContractError("adamx_moment_update: t must be state.t + 1");
  if (g.size() != state.m.size()) throw ContractError("adamx_moment_update: size mismatch");

  const double b1t = beta1_schedule(cfg.beta1, cfg.lambda, t);
  MomentState next;
  next.t = t;
  const size_t dim = g.size();
  next.m.resize(dim);
  next.v.resize(dim);
  next.v_hat.resize(dim);
  for (size_t u = 0; u < dim; ++u) {
    next.m[u] = b1t * state.m[u] + (1.0 - b1t) * g[u];
    next.v[u] = cfg.beta2 * state.v[u] + (1.0 - cfg.beta2) * g[u] * g[u];
  }
  if (t == 1) {
    next.v_hat = next.v;
  } else {
    const double b1prev = beta1_schedule(cfg.beta1, cfg.lambda, t - 1);
    const double ratio = (1.0 - b1t) / (1.0 - b1prev);
    const double ratio_sq = ratio * ratio;
    for (size_t u = 0; u < dim; ++u) {
      next.v_hat[u] = std::max(ratio_sq * state.v_hat[u], next.v[u]);
    }
  }
  return next;
}

std::vector<double> parameter_update(const std::vector<double>& theta,
                                     const MomentState& state, double alpha_t,
                                     double epsilon) {
  if (theta.size() != state.m.size()) throw ContractError("parameter_update: size mismatch");
  std::vector<double> next(theta.size());
  for (size_t u = 0; u < theta.size(); ++u) {
    next[u] = theta[u] - alpha_t * state.m[u] / (std::sqrt(state.v_hat[u]) + epsilon);
  }
  return next;
}

PlainStepResult plain_adam_step(const std::vector<double>& theta, const MomentState& state,
                                const std::vector<double>& g, const OptimizerConfig& cfg,
                                int t) {
  if (t != state.t + 1) throw ContractError("plain_adam_step: t must be state.t + 1");
  if (g.size() != state.m.size()) throw ContractError("plain_adam_step: size mismatch");

  PlainStepResult out;
  out.state.t = t;
  const size_t dim = g.size();
  out.state.m.resize(dim);
  out.state.v.resize(dim);
  out.state.v_hat.assign(dim, 0.0);  // unused by plain Adam; kept for shape
  out.theta.resize(dim);
  const double alpha_t = alpha_schedule(cfg.alpha, t, cfg.alpha_mode);
  const double m_corr = 1.0 - std::pow(cfg.beta1, t);
  const double v_corr = 1.0 - std::pow(cfg.beta2, t);
  for (size_t u = 0; u < dim; ++u) {
    out.state.m[u] = cfg.beta1 * state.m[u] + (1.0 - cfg.beta1) * g[u];
    out.state.v[u] = cfg.beta2 * state.v[u] + (1.0 - cfg.beta2) * g[u] * g[u];
    const double m_hat = out.state.m[u] / m_corr;
    const double v_hat = out.state.v[u] / v_corr;
    out.theta[u] = theta[u] - alpha_t * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
  return out;
}

PlainStepResult uniform_step_with_batch(const std::vector<double>& theta,
                                        const MomentState& state, const PerSampleModel& model,
                                        const Dataset& data, const OptimizerConfig& cfg, int t,
                                        const std::vector<int>& batch) {
  if (batch.empty()) throw ContractError("uniform_step_with_batch: empty batch");
  std::vector<double> g(model.param_dim(), 0.0);
  for (const int i : batch) {
    const LossGrad lg = model.sample_loss_grad(theta, data.row(i), data.labels[i]);
    for (size_t u = 0; u < g.size(); ++u) g[u] += lg.grad[u];
  }
  for (double& v : g) v /= static_cast<double>(batch.size());

  if (cfg.variant == Variant::kAdam) {
    return plain_adam_step(theta, state, g, cfg, t);
  }
  PlainStepResult out;
  out.state = adamx_moment_update(state, g, cfg, t);
  out.theta = parameter_update(theta, out.state,
                               alpha_schedule(cfg.alpha, t, cfg.alpha_mode), cfg.epsilon);
  return out;
}

namespace {

// k distinct indices uniformly at random: partial Fisher-Yates, then
// sorted so downstream accumulation order is deterministic.
std::vector<int> uniform_subset(int n, int k, SplitRng& rng) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_int(n - i)]);
  }
  std::vector<int> batch(pool.begin(), pool.begin() + k);
  std::sort(batch.begin(), batch.end());
  return batch;
}

}  // namespace

UniformStepResult uniform_step(const std::vector<double>& theta, const MomentState& state,
                               const PerSampleModel& model, const Dataset& data,
                               const OptimizerConfig& cfg, SplitRng& rng, int t) {
  UniformStepResult out;
  out.batch = uniform_subset(data.n, cfg.bandit.k, rng);
  PlainStepResult step = uniform_step_with_batch(theta, state, model, data, cfg, t, out.batch);
  out.theta = std::move(step.theta);
  out.state = std::move(step.state);
  return out;
}

CbStepResult adamcb_step(const std::vector<double>& theta, const MomentState& state,
                         const WeightVector& weights, const PerSampleModel& model,
                         const Dataset& data, const OptimizerConfig& cfg, SplitRng& rng,
                         int t, RunningGradBound bound) {
  CbStepResult out;
  out.selection = batch_selection(weights, cfg.bandit, rng);

  const BatchGradients grads =
      compute_batch_gradients(model, theta, data, out.selection.indices);
  const std::vector<double> g = unbiased_gradient(grads, out.selection.probs, data.n);

  out.state = adamx_moment_update(state, g, cfg, t);
  out.theta = parameter_update(theta, out.state,
                               alpha_schedule(cfg.alpha, t, cfg.alpha_mode), cfg.epsilon);

  const WeightVector& base =
      cfg.bandit.persist_capped_weights ? out.selection.capped_weights : weights;
  const std::map<int, double> norms = grads.norms();
  if (cfg.bandit.l_bound) {
    out.weights = weight_update_cb(base, out.selection, norms, cfg.bandit);
    out.bound = bound;
  } else {
    auto [updated, new_bound] =
        weight_update_cb_unknown_l(base, out.selection, norms, cfg.bandit, bound);
    out.weights = std::move(updated);
    out.bound = new_bound;
  }
  return out;
}

BsStepResult adambs_step(const std::vector<double>& theta, const MomentState& state,
                         const WeightVector& weights, const PerSampleModel& model,
                         const Dataset& data, const OptimizerConfig& cfg, SplitRng& rng,
                         int t, RunningGradBound bound) {
  BsStepResult out;
  const std::vector<double> p = bs_probabilities(weights, cfg.bandit.gamma);
  out.batch = sample_with_replacement(p, cfg.bandit.k, rng);

  const BatchGradients grads = compute_batch_gradients(model, theta, data, out.batch);
  // (1/k) * sum over draws of g_j / (n * p_j); repeated draws count again.
  std::vector<double> g(model.param_dim(), 0.0);
  for (const int j : out.batch) {
    const SampleGradient& sg = grads.per_index.at(j);
    const double scale = 1.0 / (cfg.bandit.k * data.n * p[j]);
    for (size_t u = 0; u < g.size(); ++u) g[u] += scale * sg.grad[u];
  }

  out.state = adamx_moment_update(state, g, cfg, t);
  out.theta = parameter_update(theta, out.state,
                               alpha_schedule(cfg.alpha, t, cfg.alpha_mode), cfg.epsilon);

  const std::map<int, double> norms = grads.norms();
  double l_bound;
  if (cfg.bandit.l_bound) {
    l_bound = *cfg.bandit.l_bound;
    out.bound = bound;
  } else {
    out.bound = update_grad_bound(bound, norms);
    l_bound = out.bound.l;
  }
  out.weights = weight_update_bs(weights, p, out.batch, norms, cfg.bandit.gamma, l_bound);
  return out;
}

int iterations_per_epoch(int n, int k) {
  if (n < 1 || k < 1) throw ConfigError("iterations_per_epoch: need n >= 1 and k >= 1");
  return (n + k - 1) / k;
}

namespace {

uint64_t hash_doubles(const std::vector<double>& values) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const double v : values) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int shift = 0; shift < 64; shift += 8) {
      h ^= (bits >> shift) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

bool all_finite(const std::vector<double>& values) {
  for (const double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

Trajectory run_optimizer(const PerSampleModel& model, const Dataset& train,
                         const Dataset& test, const OptimizerConfig& cfg_in, uint64_t seed,
                         int t_total, int eval_every) {
  if (t_total < 1) throw ConfigError("run_optimizer: need t_total >= 1");
  if (eval_every < 1) throw ConfigError("run_optimizer: need eval_every >= 1");
  validate_optimizer_config(cfg_in, train.n);

  OptimizerConfig cfg = cfg_in;
  if (cfg.bandit.gamma_mode == GammaMode::kTheoretical) {
    cfg.bandit.gamma = exploration_gamma(train.n, cfg.bandit.k, t_total);
    cfg.bandit.gamma_mode = GammaMode::kFixed;
  }

  Trajectory traj;
  traj.optimizer = cfg.display_name.empty() ? variant_name(cfg.variant) : cfg.display_name;
  traj.seed = seed;
  traj.resolved_gamma = cfg.bandit.gamma;

  SplitRng root(seed);
  SplitRng init_rng = root.split("init");
  SplitRng sample_rng = root.split("sample");

  std::vector<double> theta = model.initial_params(init_rng);
  MomentState state = MomentState::zeros(model.param_dim());
  WeightVector weights(train.n, 1.0);
  RunningGradBound bound;

  const int ipe = iterations_per_epoch(train.n, cfg.bandit.k);
  const auto start = std::chrono::steady_clock::now();
  const bool bandit_variant =
      cfg.variant == Variant::kAdamBS || cfg.variant == Variant::kAdamCB;

  int last_null_size = 0;
  auto record = [&](int t) {
    EvalRecord rec;
    rec.t = t;
    rec.epoch = (t + ipe - 1) / ipe;
    rec.train_loss = full_loss(model, theta, train);
    rec.test_loss = test.n > 0 ? full_loss(model, theta, test)
                               : std::numeric_limits<double>::quiet_NaN();
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    rec.theta_hash = hash_doubles(theta);
    rec.null_set_size = last_null_size;
    traj.evals.push_back(rec);
    return rec.train_loss;
  };

  for (int t = 1; t <= t_total; ++t) {
    switch (cfg.variant) {
      case Variant::kAdam:
      case Variant::kAdamX: {
        UniformStepResult step = uniform_step(theta, state, model, train, cfg, sample_rng, t);
        theta = std::move(step.theta);
        state = std::move(step.state);
        break;
      }
      case Variant::kAdamCB: {
        CbStepResult step =
            adamcb_step(theta, state, weights, model, train, cfg, sample_rng, t, bound);
        theta = std::move(step.theta);
        state = std::move(step.state);
        weights = std::move(step.weights);
        bound = step.bound;
        last_null_size = static_cast<int>(step.selection.null_set.size());
        break;
      }
      case Variant::kAdamBS: {
        BsStepResult step =
            adambs_step(theta, state, weights, model, train, cfg, sample_rng, t, bound);
        theta = std::move(step.theta);
        state = std::move(step.state);
        weights = std::move(step.weights);
        bound = step.bound;
        break;
      }
    }
    traj.degenerate_l_warning = traj.degenerate_l_warning || bound.degenerate;

    if (!all_finite(theta)) {
      traj.diverged = true;
      traj.diverged_at = t;
      record(t);
      break;
    }
    if (t % eval_every == 0 || t == t_total) {
      const double loss = record(t);
      if (!std::isfinite(loss) || loss > kDivergenceLossLimit) {
        traj.diverged = true;
        traj.diverged_at = t;
        break;
      }
    }
  }

  traj.final_theta = std::move(theta);
  if (bandit_variant) traj.final_weights = std::move(weights);
  return traj;
}

}  // namespace adamcb
