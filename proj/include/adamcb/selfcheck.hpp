#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adamcb {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;  // one line: key statistics, or what failed
};

// Probability contract over random instances (n <= 64): sum(pi) = k within
// 1e-9, pi_i in [k*gamma/n - 1e-12, 1 + 1e-9], and max(pi) = 1 within 1e-9
// whenever capping triggered. Also spot-checks scale invariance.
CheckResult check_probability_contract(int instances, uint64_t seed);

// Subset-sampler marginals: per probability vector (n <= 16), `draws`
// draws must put every empirical inclusion frequency within 4 binomial
// standard deviations of pi_i, and each draw must have exactly k distinct
// indices.
CheckResult check_depround_marginals(int vectors, int draws, uint64_t seed);

// Exact expectations by enumeration / linearity: the importance-weighted
// batch gradient matches the full mean gradient to 1e-12 relative on
// random instances, and the count-corrected loss estimate of the
// with-replacement sampler is exactly unbiased on a dyadic 3-sample,
// k = 2 enumeration.
CheckResult check_algebraic_unbiasedness(int instances, uint64_t seed);

// Monte-Carlo unbiasedness on a fixed 8-sample logistic instance: the
// empirical mean of both batch-gradient estimators stays within
// 5 standard errors of the full gradient, per coordinate.
CheckResult check_stochastic_unbiasedness(int draws, uint64_t seed);

// Analytic gradients against central differences at `points` random
// evaluation points per model: 1e-6 relative for the convex models,
// 1e-5 for the MLP.
CheckResult check_gradient_oracles(int points, uint64_t seed);

// Writes an IDX fixture pair plus three corrupted variants under tmp_dir
// and checks exact decoding and the typed errors.
CheckResult check_idx_loader(const std::string& tmp_dir);

// Running-max parity: when the first batch already contains the sample of
// maximum gradient norm, the unknown-bound run must reproduce the
// known-bound (L = that max) weight trajectory exactly from iteration 2.
CheckResult check_unknown_l_parity();

// The smoke subset used by the CLI selftest (cheap budgets, < 60 s).
std::vector<CheckResult> run_selftest(const std::string& tmp_dir);

}  // namespace adamcb
