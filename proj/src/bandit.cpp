#include "adamcb/bandit.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

#include "adamcb/errors.hpp"

namespace adamcb {

namespace {

// DepRound treats values this close to 0 or 1 as integral. Capped entries
// come out of the probability formula within a few ulp of 1, so the snap
// tolerance matches the contract tolerance on pi <= 1.
constexpr double kIntegralSnapTol = 1e-9;

void check_weights(const WeightVector& weights) {
  if (weights.empty()) throw ConfigError("weight vector is empty");
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i]) || weights[i] <= 0.0) {
      throw ConfigError("weight[" + std::to_string(i) + "] = " +
                        std::to_string(weights[i]) + " is not strictly positive");
    }
  }
}

// Rescale by 1/max if the largest weight underflowed below the floor.
// Probabilities depend only on ratios, so this is behaviour-preserving.
void rescue_underflow(WeightVector& weights) {
  const double max_w = *std::max_element(weights.begin(), weights.end());
  if (max_w >= kWeightRescueFloor) return;
  for (double& w : weights) w /= max_w;
}

}  // namespace

void validate_bandit_config(const BanditConfig& cfg, int n, bool require_positive_gamma) {
  if (cfg.k < 1) throw ConfigError("batch size k must be >= 1");
  if (n >= 1 && cfg.k >= n) {
    throw ConfigError("batch size k = " + std::to_string(cfg.k) +
                      " must be smaller than the dataset size n = " + std::to_string(n));
  }
  // gamma == 1 only ever arrives from the horizon-tuned schedule, where the
  // uniform fallback makes it well-defined; user configs reject it earlier.
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) {
    throw ConfigError("gamma must lie in [0, 1]");
  }
  if (require_positive_gamma && cfg.gamma_mode == GammaMode::kFixed && cfg.gamma <= 0.0) {
    throw ConfigError("gamma must be positive: the weight update divides by p_min = k*gamma/n");
  }
  if (cfg.l_bound && (!std::isfinite(*cfg.l_bound) || *cfg.l_bound <= 0.0)) {
    throw ConfigError("l_bound must be positive and finite when given");
  }
}

CappingResult compute_capping_threshold(const WeightVector& weights, int k, double gamma) {
  check_weights(weights);
  const int n = static_cast<int>(weights.size());
  if (k < 1 || k >= n) throw ConfigError("compute_capping_threshold: need 1 <= k < n");
  if (!(gamma >= 0.0 && gamma < 1.0 - kGammaOneTol)) {
    throw ConfigError("compute_capping_threshold: need gamma in [0, 1)");
  }

  CappingResult result;
  result.capped = weights;

  const double c = (1.0 / k - gamma / n) / (1.0 - gamma);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double max_w = *std::max_element(weights.begin(), weights.end());
  if (c >= 1.0 || max_w < c * total) return result;  // no entry would exceed pi = 1

  // Sort indices by weight, descending; ties broken by index so the scan
  // is deterministic.
  std::vector<int> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return a < b;
  });

  // Tail sums accumulated from the small end. Peeling head weights off the
  // grand total instead loses the entire tail to cancellation once one
  // weight dominates by more than 2^53, which would skew tau.
  std::vector<double> tail(n + 1, 0.0);
  for (int j = n - 1; j >= 0; --j) tail[j] = tail[j + 1] + weights[order[j]];

  // Walk m = 1, 2, ... while m*C < 1. Stop at the first m where
  // w_(m) >= tau and w_(m+1) < tau. When the trigger above fired and
  // C < 1, such an m always exists with m <= k-1 (k*C >= 1 holds whenever
  // k <= n), so falling out of the loop is a logic error, not an input
  // error.
  for (int m = 1; m < n && m * c < 1.0; ++m) {
    const double tau = c * tail[m] / (1.0 - m * c);
    if (weights[order[m - 1]] >= tau && (m == n - 1 || weights[order[m]] < tau)) {
      result.tau = tau;
      for (int i = 0; i < n; ++i) {
        if (weights[i] >= tau) {
          result.null_set.push_back(i);
          result.capped[i] = tau;
        }
      }
      return result;
    }
  }
  throw ContractError("compute_capping_threshold: no threshold found after trigger");
}

SelectionProbabilities compute_probabilities(const WeightVector& capped, int k, double gamma) {
  check_weights(capped);
  const int n = static_cast<int>(capped.size());
  if (k < 1 || k >= n) throw ConfigError("compute_probabilities: need 1 <= k < n");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("compute_probabilities: need gamma in [0, 1]");
  }

  SelectionProbabilities probs;
  probs.k = k;
  probs.gamma = gamma;
  probs.p_min = static_cast<double>(k) * gamma / n;
  probs.values.resize(capped.size());

  if (gamma >= 1.0 - kGammaOneTol) {
    // Exploration saturates: the weight term vanishes, leave exactly k/n.
    std::fill(probs.values.begin(), probs.values.end(), static_cast<double>(k) / n);
    return probs;
  }

  const double total = std::accumulate(capped.begin(), capped.end(), 0.0);
  for (int i = 0; i < n; ++i) {
    probs.values[i] = k * ((1.0 - gamma) * capped[i] / total + gamma / n);
  }
  return probs;
}

std::vector<int> dep_round(int k, const SelectionProbabilities& probs, SplitRng& rng,
                           std::vector<std::vector<double>>* step_trace) {
  const int n = static_cast<int>(probs.values.size());
  if (k < 1 || k > n) throw ConfigError("dep_round: need 1 <= k <= n");

  std::vector<double> p = probs.values;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!(p[i] >= -1e-12 && p[i] <= 1.0 + kProbOneTol)) {
      throw ConfigError("dep_round: probability " + std::to_string(i) + " = " +
                        std::to_string(p[i]) + " outside [0, 1]");
    }
    p[i] = std::clamp(p[i], 0.0, 1.0);
    if (p[i] < kIntegralSnapTol) p[i] = 0.0;
    if (p[i] > 1.0 - kIntegralSnapTol) p[i] = 1.0;
    sum += p[i];
  }
  if (std::abs(sum - k) > kProbSumTol + n * kIntegralSnapTol) {
    throw ConfigError("dep_round: probabilities sum to " + std::to_string(sum) +
                      ", expected " + std::to_string(k));
  }

  // Fractional coordinates in ascending order. Each pairing step makes at
  // least one of the pair integral, so a single pass with a carried
  // fractional survivor visits every coordinate once: the pair is always
  // (smallest fractional index, next fractional index).
  std::vector<int> frac;
  for (int i = 0; i < n; ++i) {
    if (p[i] > 0.0 && p[i] < 1.0) frac.push_back(i);
  }

  int carry = -1;  // smallest still-fractional index, -1 if none
  for (const int idx : frac) {
    if (carry < 0) {
      carry = idx;
      continue;
    }
    const int i = carry;
    const int j = idx;
    const double alpha = std::min(1.0 - p[i], p[j]);
    const double beta = std::min(p[i], 1.0 - p[j]);
    if (rng.uniform01() < beta / (alpha + beta)) {
      p[i] += alpha;
      p[j] -= alpha;
    } else {
      p[i] -= beta;
      p[j] += beta;
    }
    if (p[i] < kIntegralSnapTol) p[i] = 0.0;
    if (p[i] > 1.0 - kIntegralSnapTol) p[i] = 1.0;
    if (p[j] < kIntegralSnapTol) p[j] = 0.0;
    if (p[j] > 1.0 - kIntegralSnapTol) p[j] = 1.0;
    if (step_trace) step_trace->push_back(p);

    const bool i_frac = p[i] > 0.0 && p[i] < 1.0;
    const bool j_frac = p[j] > 0.0 && p[j] < 1.0;
    carry = i_frac ? i : (j_frac ? j : -1);
  }
  if (carry >= 0) {
    // Accumulated snap drift can leave one near-integral straggler.
    double& last = p[carry];
    if (std::abs(last - 1.0) < 1e-6) {
      last = 1.0;
    } else if (std::abs(last) < 1e-6) {
      last = 0.0;
    } else {
      throw ContractError("dep_round: non-integral remainder " + std::to_string(last));
    }
  }

  std::vector<int> selected;
  selected.reserve(k);
  for (int i = 0; i < n; ++i) {
    if (p[i] == 1.0) selected.push_back(i);
  }
  if (static_cast<int>(selected.size()) != k) {
    throw ContractError("dep_round: selected " + std::to_string(selected.size()) +
                        " indices, expected " + std::to_string(k));
  }
  return selected;
}

SelectionResult batch_selection(const WeightVector& weights, const BanditConfig& cfg,
                                SplitRng& rng) {
  const int n = static_cast<int>(weights.size());
  validate_bandit_config(cfg, n, /*require_positive_gamma=*/false);
  check_weights(weights);

  SelectionResult result;
  if (cfg.gamma >= 1.0 - kGammaOneTol) {
    result.capped_weights = weights;  // uniform fallback: capping cannot trigger
  } else {
    CappingResult capping = compute_capping_threshold(weights, cfg.k, cfg.gamma);
    result.null_set = std::move(capping.null_set);
    result.capped_weights = std::move(capping.capped);
  }
  result.probs = compute_probabilities(result.capped_weights, cfg.k, cfg.gamma);
  result.indices = dep_round(cfg.k, result.probs, rng);
  return result;
}

double loss_transform(double grad_norm, double pi_j, double p_min, double l_bound) {
  if (!(p_min > 0.0) || pi_j < p_min - 1e-12) {
    throw ConfigError("loss_transform: need 0 < p_min <= pi_j");
  }
  if (!(l_bound > 0.0) || !std::isfinite(l_bound)) {
    throw ConfigError("loss_transform: need a positive finite l_bound");
  }
  if (grad_norm < 0.0) throw ConfigError("loss_transform: negative gradient norm");
  if (grad_norm > l_bound * (1.0 + 1e-9)) {
    throw BoundViolationError("gradient norm " + std::to_string(grad_norm) +
                              " exceeds the configured bound " + std::to_string(l_bound));
  }
  const double ratio = p_min * grad_norm / (l_bound * pi_j);
  const double ell = 1.0 - ratio * ratio;
  // ratio <= 1 up to roundoff, so ell only leaves [0, 1] by a few ulp.
  return std::clamp(ell, 0.0, 1.0);
}

WeightVector weight_update_cb(const WeightVector& weights, const SelectionResult& result,
                              const std::map<int, double>& grad_norms,
                              const BanditConfig& cfg) {
  check_weights(weights);
  if (!cfg.l_bound) throw ContractError("weight_update_cb: l_bound is required here");
  const int n = static_cast<int>(weights.size());
  const double p_min = result.probs.p_min;

  WeightVector updated = weights;
  for (const int j : result.indices) {
    if (j < 0 || j >= n) throw ContractError("weight_update_cb: index out of range");
    if (std::binary_search(result.null_set.begin(), result.null_set.end(), j)) {
      continue;  // capped entries hold the threshold value; no update
    }
    const auto it = grad_norms.find(j);
    if (it == grad_norms.end()) {
      throw ContractError("weight_update_cb: missing gradient norm for index " +
                          std::to_string(j));
    }
    const double ell = loss_transform(it->second, result.probs.values[j], p_min, *cfg.l_bound);
    updated[j] *= std::exp(-static_cast<double>(cfg.k) * cfg.gamma * ell / n);
  }
  rescue_underflow(updated);
  return updated;
}

RunningGradBound update_grad_bound(RunningGradBound bound,
                                   const std::map<int, double>& grad_norms) {
  for (const auto& [idx, norm] : grad_norms) {
    (void)idx;
    if (norm < 0.0 || !std::isfinite(norm)) {
      throw ContractError("update_grad_bound: gradient norms must be finite and >= 0");
    }
    bound.l = std::max(bound.l, norm);
  }
  if (bound.l <= 0.0) {
    // Every observed gradient so far is exactly zero. Any positive stand-in
    // keeps the losses at their maximum value of 1, which is the right
    // degenerate behaviour; flag it so callers can warn.
    bound.l = std::numeric_limits<double>::min();
    bound.degenerate = true;
  }
  return bound;
}

std::pair<WeightVector, RunningGradBound> weight_update_cb_unknown_l(
    const WeightVector& weights, const SelectionResult& result,
    const std::map<int, double>& grad_norms, const BanditConfig& cfg,
    RunningGradBound bound) {
  bound = update_grad_bound(bound, grad_norms);
  BanditConfig known = cfg;
  known.l_bound = bound.l;
  return {weight_update_cb(weights, result, grad_norms, known), bound};
}

std::vector<double> bs_probabilities(const WeightVector& weights, double gamma) {
  check_weights(weights);
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError("bs_probabilities: need gamma in [0, 1]");
  }
  const int n = static_cast<int>(weights.size());
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> p(weights.size());
  for (int i = 0; i < n; ++i) {
    p[i] = (1.0 - gamma) * weights[i] / total + gamma / n;
  }
  return p;
}

std::vector<int> sample_with_replacement(const std::vector<double>& p, int k, SplitRng& rng) {
  if (p.empty()) throw ConfigError("sample_with_replacement: empty distribution");
  if (k < 1) throw ConfigError("sample_with_replacement: need k >= 1");
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i])) {
      throw ConfigError("sample_with_replacement: p[" + std::to_string(i) +
                        "] is not a probability");
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kProbSumTol) {
    throw ConfigError("sample_with_replacement: probabilities sum to " + std::to_string(sum));
  }

  std::vector<double> cumulative(p.size());
  std::partial_sum(p.begin(), p.end(), cumulative.begin());
  std::vector<int> batch(k);
  for (int draw = 0; draw < k; ++draw) {
    const double u = rng.uniform01() * sum;
    // First bucket with cumulative > u; zero-probability buckets are
    // skipped exactly because their cumulative value repeats.
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    batch[draw] = static_cast<int>(std::min<std::ptrdiff_t>(
        it - cumulative.begin(), static_cast<std::ptrdiff_t>(p.size()) - 1));
  }
  std::sort(batch.begin(), batch.end());
  return batch;
}

double bs_loss_estimate(double ell, int count, int k, double p_j) {
  if (count < 1 || k < 1) throw ContractError("bs_loss_estimate: need count, k >= 1");
  if (!(p_j > 0.0)) throw ContractError("bs_loss_estimate: need p_j > 0");
  return ell * count / (k * p_j);
}

WeightVector weight_update_bs(const WeightVector& weights, const std::vector<double>& p,
                              const std::vector<int>& batch,
                              const std::map<int, double>& grad_norms, double gamma,
                              double l_bound) {
  check_weights(weights);
  const int n = static_cast<int>(weights.size());
  if (static_cast<int>(p.size()) != n) {
    throw ContractError("weight_update_bs: probability vector size mismatch");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("weight_update_bs: need gamma in (0, 1)");
  }
  const int k = static_cast<int>(batch.size());
  if (k < 1) throw ConfigError("weight_update_bs: empty batch");
  const double p_min = gamma / n;

  std::map<int, int> counts;
  for (const int j : batch) {
    if (j < 0 || j >= n) throw ContractError("weight_update_bs: index out of range");
    ++counts[j];
  }

  WeightVector updated = weights;
  for (const auto& [j, count] : counts) {
    const auto it = grad_norms.find(j);
    if (it == grad_norms.end()) {
      throw ContractError("weight_update_bs: missing gradient norm for index " +
                          std::to_string(j));
    }
    const double ell = loss_transform(it->second, p[j], p_min, l_bound);
    const double ell_hat = bs_loss_estimate(ell, count, k, p[j]);
    updated[j] *= std::exp(-gamma * ell_hat / n);
  }
  rescue_underflow(updated);
  return updated;
}

double exploration_gamma(int n, int k, int t_total) {
  if (k < 1) throw ConfigError("exploration_gamma: need k >= 1");
  if (n <= k) throw ConfigError("exploration_gamma: need n > k (ln(n/k) must be positive)");
  if (t_total < 1) throw ConfigError("exploration_gamma: need t_total >= 1");
  const double e_minus_1 = std::exp(1.0) - 1.0;
  const double value = std::sqrt(n * std::log(static_cast<double>(n) / k) /
                                 (e_minus_1 * static_cast<double>(t_total) * k));
  return std::min(1.0, value);
}

}  // namespace adamcb
