#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "adamcb/rng.hpp"

namespace adamcb {

// Importance weights over the n training samples. Entries are strictly
// positive and finite; only the ratios w_i / sum(w) matter for selection,
// which is what makes the underflow rescue in the update ops legal.
using WeightVector = std::vector<double>;

enum class GammaMode {
  kFixed,        // use BanditConfig::gamma as given
  kTheoretical,  // resolve gamma from (n, k, horizon) at run start
};

struct BanditConfig {
  int k = 128;          // batch size, 1 <= k < n
  double gamma = 0.4;   // exploration rate in [0, 1)
  std::optional<double> l_bound;  // gradient-norm bound; empty = track a running max
  GammaMode gamma_mode = GammaMode::kFixed;
  // When true (the default), the capped weights computed during batch
  // selection overwrite the stored weights, so the cap persists into the
  // next iteration. When false the cap only shapes this iteration's
  // probabilities and the stored weights keep their uncapped values.
  bool persist_capped_weights = true;
};

// Validates ranges and the k < n relationship. p_min = k*gamma/n must be
// positive for the loss transform, so gamma = 0 is rejected here for the
// bandit-driven optimizers.
void validate_bandit_config(const BanditConfig& cfg, int n, bool require_positive_gamma);

// Inclusion probabilities pi_i for a batch of k out of n: sum(pi) == k and
// every pi_i is in [k*gamma/n, 1].
struct SelectionProbabilities {
  std::vector<double> values;
  int k = 0;
  double gamma = 0.0;
  double p_min = 0.0;  // k * gamma / n
};

struct CappingResult {
  std::optional<double> tau;   // empty when no cap was needed
  std::vector<int> null_set;   // indices with w_i >= tau, ascending
  WeightVector capped;         // min(w_i, tau); equals the input when tau is empty
};

struct SelectionResult {
  std::vector<int> indices;    // the batch J_t: k distinct indices, ascending
  SelectionProbabilities probs;
  std::vector<int> null_set;   // capped indices (their pi is exactly 1)
  WeightVector capped_weights;
};

// Running maximum of observed per-sample gradient norms, used in place of
// a known bound L. `degenerate` records that the very first observation
// set was all zeros and a tiny positive value had to stand in for L.
struct RunningGradBound {
  double l = 0.0;
  bool degenerate = false;
};

// Finds the cap threshold tau for weights whose largest entry would push
// its inclusion probability above 1. With weights sorted descending and
// S_m the sum of entries after the first m, tau solves
//
//   tau = C * S_m / (1 - m*C),   C = (1/k - gamma/n) / (1 - gamma),
//
// at the smallest m >= 1 (with m*C < 1) where w_(m) >= tau and the next
// weight falls below tau. Returns no tau when C >= 1 or no weight reaches
// C * sum(w). Requires gamma < 1 (the uniform fallback never caps).
CappingResult compute_capping_threshold(const WeightVector& weights, int k, double gamma);

// pi_i = k * ((1-gamma) * w_i / sum(w) + gamma / n) over capped weights.
// Near gamma = 1 this degenerates to the uniform pi_i = k/n, which is
// returned exactly in that case.
SelectionProbabilities compute_probabilities(const WeightVector& capped, int k, double gamma);

// Rounds fractional inclusion probabilities to a size-k subset whose
// marginals match them exactly. Repeatedly pairs the first two fractional
// coordinates (ascending index order), moving mass between them so one
// lands on 0 or 1; integral entries are never touched. `step_trace`, when
// given, receives the probability vector after every pairing step.
std::vector<int> dep_round(int k, const SelectionProbabilities& probs, SplitRng& rng,
                           std::vector<std::vector<double>>* step_trace = nullptr);

// Cap, convert to probabilities, and draw the batch. One iteration of the
// selection side of the combinatorial bandit.
SelectionResult batch_selection(const WeightVector& weights, const BanditConfig& cfg,
                                SplitRng& rng);

// Maps an observed gradient norm to a reward-style loss in [0, 1]:
//   ell = 1 - (p_min * grad_norm / (l_bound * pi_j))^2.
// Small losses mean informative samples (large gradients), so the
// exponential-weights update below keeps their weights high.
double loss_transform(double grad_norm, double pi_j, double p_min, double l_bound);

// Exponential-weights update for the selected batch: for each selected
// j not in the null set, w_j *= exp(-k * gamma * ell_j / n). Null-set
// entries keep the threshold value assigned during capping. `weights`
// is the base vector to update (capped or original, per the persistence
// choice). Rescales everything by 1/max(w) if the maximum would drop
// below 1e-150; ratios, and therefore behaviour, are unchanged.
WeightVector weight_update_cb(const WeightVector& weights, const SelectionResult& result,
                              const std::map<int, double>& grad_norms,
                              const BanditConfig& cfg);

// Same update when no bound L is known: first fold the observed norms
// into the running maximum, then compute losses against that estimate.
std::pair<WeightVector, RunningGradBound> weight_update_cb_unknown_l(
    const WeightVector& weights, const SelectionResult& result,
    const std::map<int, double>& grad_norms, const BanditConfig& cfg,
    RunningGradBound bound);

// Folds a batch of observed norms into the running bound. Substitutes a
// tiny positive value (and sets `degenerate`) if the bound would stay 0.
RunningGradBound update_grad_bound(RunningGradBound bound,
                                   const std::map<int, double>& grad_norms);

// Per-sample selection distribution of the with-replacement sampler:
// p_i = (1-gamma) * w_i / sum(w) + gamma / n, summing to 1.
std::vector<double> bs_probabilities(const WeightVector& weights, double gamma);

// k independent categorical draws; the returned multiset is ascending.
std::vector<int> sample_with_replacement(const std::vector<double>& p, int k, SplitRng& rng);

// Count-corrected importance estimate of one sample's loss under
// with-replacement sampling: ell * count / (k * p_j). Averaging this over
// the draw distribution gives back ell exactly.
double bs_loss_estimate(double ell, int count, int k, double p_j);

// Exponential-weights update for the with-replacement sampler. Losses of
// selected samples are importance-corrected by their draw count via
// bs_loss_estimate, then w_j *= exp(-gamma * ell_hat_j / n). `batch` is
// the drawn multiset. Applies the same underflow rescue as
// weight_update_cb.
WeightVector weight_update_bs(const WeightVector& weights, const std::vector<double>& p,
                              const std::vector<int>& batch,
                              const std::map<int, double>& grad_norms, double gamma,
                              double l_bound);

// Horizon-tuned exploration rate
//   gamma = min(1, sqrt(n * ln(n/k) / ((e-1) * t_total * k))),
// defined for n > k and t_total >= 1.
double exploration_gamma(int n, int k, int t_total);

// Shared tolerances for the probability contract.
inline constexpr double kProbSumTol = 1e-9;   // |sum(pi) - k|
inline constexpr double kProbOneTol = 1e-9;   // pi_i <= 1 + this
inline constexpr double kGammaOneTol = 1e-9;  // gamma >= 1 - this => uniform fallback
inline constexpr double kWeightRescueFloor = 1e-150;

}  // namespace adamcb
