#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "adamcb/bandit.hpp"
#include "adamcb/errors.hpp"
#include "adamcb/rng.hpp"

using namespace adamcb;

TEST_CASE("capping threshold on a dominant weight") {
  // k=2, gamma=0.5: C = (1/2 - 1/8) / (1/2) = 0.75; the 10 triggers
  // (10 >= 0.75 * 13) and tau = 0.75 * 3 / (1 - 0.75) = 9, all exact.
  const WeightVector w = {10.0, 1.0, 1.0, 1.0};
  const CappingResult cap = compute_capping_threshold(w, 2, 0.5);
  REQUIRE(cap.tau.has_value());
  CHECK(*cap.tau == 9.0);
  CHECK(cap.null_set == std::vector<int>{0});
  CHECK(cap.capped == WeightVector{9.0, 1.0, 1.0, 1.0});

  // Capped total is 12; the capped entry sits exactly at pi = 1 and the
  // rest at 2 * (0.5/12 + 0.125) = 1/3.
  const SelectionProbabilities probs = compute_probabilities(cap.capped, 2, 0.5);
  CHECK(probs.values[0] == doctest::Approx(1.0).epsilon(1e-15));
  for (int i = 1; i < 4; ++i) {
    CHECK(probs.values[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  CHECK(probs.values[0] + probs.values[1] + probs.values[2] + probs.values[3] ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(probs.p_min == doctest::Approx(0.25));
}

TEST_CASE("balanced weights never trigger the cap") {
  const CappingResult cap = compute_capping_threshold({1.0, 1.0, 1.0, 1.0}, 2, 0.5);
  CHECK_FALSE(cap.tau.has_value());
  CHECK(cap.null_set.empty());
  CHECK(cap.capped == WeightVector{1.0, 1.0, 1.0, 1.0});
}

TEST_CASE("k = 1 cannot overflow a probability, so it never caps") {
  // C = (1 - gamma/n) / (1 - gamma) >= 1 for every gamma in [0, 1).
  const CappingResult cap = compute_capping_threshold({1e12, 1.0, 1.0}, 1, 0.3);
  CHECK_FALSE(cap.tau.has_value());
  const SelectionProbabilities probs = compute_probabilities(cap.capped, 1, 0.3);
  for (const double pi : probs.values) CHECK(pi <= 1.0 + kProbOneTol);
  CHECK(probs.values[0] + probs.values[1] + probs.values[2] ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tail sums survive a weight that dwarfs the rest") {
  // One weight 2^60 times the others: tau must still cap every large
  // entry to exactly pi = 1, which fails if the tail sum is computed by
  // subtracting the head from the grand total.
  WeightVector w(40, 1.0);
  w[7] = std::ldexp(1.0, 60);
  w[23] = std::ldexp(1.0, 59);
  const int k = 10;
  const double gamma = 0.2;
  const CappingResult cap = compute_capping_threshold(w, k, gamma);
  REQUIRE(cap.tau.has_value());
  const SelectionProbabilities probs = compute_probabilities(cap.capped, k, gamma);
  for (const int i : cap.null_set) {
    CHECK(probs.values[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
  double sum = 0.0;
  for (const double pi : probs.values) sum += pi;
  CHECK(sum == doctest::Approx(k).epsilon(1e-12));
}

TEST_CASE("probabilities for the three-weight example") {
  const SelectionProbabilities probs = compute_probabilities({2.0, 1.0, 1.0}, 2, 0.3);
  CHECK(probs.values[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(probs.values[1] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(probs.values[2] == doctest::Approx(0.55).epsilon(1e-15));
}

TEST_CASE("gamma at or near 1 degenerates to the uniform distribution") {
  const WeightVector w = {5.0, 1.0, 1.0, 1.0, 1.0};
  for (const double gamma : {1.0, 1.0 - 1e-10}) {
    const SelectionProbabilities probs = compute_probabilities(w, 2, gamma);
    for (const double pi : probs.values) CHECK(pi == 2.0 / 5.0);
  }
}

TEST_CASE("dep_round keeps integral coordinates fixed") {
  SelectionProbabilities probs;
  probs.values = {1.0, 0.0, 1.0, 0.0};
  probs.k = 2;
  SplitRng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    CHECK(dep_round(2, probs, rng) == std::vector<int>{0, 2});
  }
}

TEST_CASE("dep_round draws exactly k distinct ascending indices") {
  SelectionProbabilities probs;
  probs.values = {0.5, 0.5, 0.5, 0.5, 0.25, 0.75, 0.3, 0.7};
  probs.k = 4;
  SplitRng rng(6);
  for (int rep = 0; rep < 500; ++rep) {
    const std::vector<int> batch = dep_round(4, probs, rng);
    REQUIRE(batch.size() == 4);
    for (size_t i = 1; i < batch.size(); ++i) CHECK(batch[i] > batch[i - 1]);
    CHECK(batch.front() >= 0);
    CHECK(batch.back() < 8);
  }
}

TEST_CASE("each dep_round pairing step preserves the sum and settles a coordinate") {
  SelectionProbabilities probs;
  probs.values = {0.5, 0.5, 0.5, 0.5, 0.25, 0.75};
  probs.k = 3;
  SplitRng rng(7);
  std::vector<std::vector<double>> trace;
  dep_round(3, probs, rng, &trace);
  REQUIRE_FALSE(trace.empty());

  auto fractional = [](const std::vector<double>& p) {
    int count = 0;
    for (const double x : p) {
      if (x > 0.0 && x < 1.0) ++count;
    }
    return count;
  };
  int prev_frac = fractional(probs.values);
  for (const std::vector<double>& p : trace) {
    double sum = 0.0;
    for (const double x : p) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(3.0).epsilon(1e-12));
    const int now = fractional(p);
    CHECK(now < prev_frac);
    prev_frac = now;
  }
  CHECK(prev_frac == 0);
}

TEST_CASE("dep_round rejects malformed probability vectors") {
  SplitRng rng(8);
  SelectionProbabilities bad_sum;
  bad_sum.values = {0.5, 0.5, 0.5};
  bad_sum.k = 2;
  CHECK_THROWS_AS(dep_round(2, bad_sum, rng), ConfigError);

  SelectionProbabilities negative;
  negative.values = {-0.2, 1.0, 1.0, 0.2};
  negative.k = 2;
  CHECK_THROWS_AS(dep_round(2, negative, rng), ConfigError);

  SelectionProbabilities overflow;
  overflow.values = {1.5, 0.5};
  overflow.k = 2;
  CHECK_THROWS_AS(dep_round(2, overflow, rng), ConfigError);
}

TEST_CASE("batch selection always includes capped entries") {
  // Index 0 is capped to pi = 1, so every draw must contain it.
  BanditConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.4;
  const WeightVector w = {1e9, 1.0, 1.0, 1.0, 1.0, 1.0};
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    SplitRng rng(seed);
    const SelectionResult sel = batch_selection(w, cfg, rng);
    REQUIRE(sel.indices.size() == 2);
    CHECK(std::binary_search(sel.indices.begin(), sel.indices.end(), 0));
    CHECK(sel.null_set == std::vector<int>{0});
  }
}

TEST_CASE("batch selection under the uniform fallback") {
  BanditConfig cfg;
  cfg.k = 3;
  cfg.gamma = 1.0;
  SplitRng rng(9);
  const SelectionResult sel = batch_selection({1.0, 50.0, 1.0, 1.0, 1.0, 1.0}, cfg, rng);
  CHECK(sel.indices.size() == 3);
  CHECK(sel.null_set.empty());
  for (const double pi : sel.probs.values) CHECK(pi == 0.5);
}

TEST_CASE("loss transform maps gradient norms into [0, 1]") {
  const double l_bound = 2.0;
  const double p_min = 0.1;
  CHECK(loss_transform(0.0, 0.5, p_min, l_bound) == 1.0);
  // norm = L/2 at pi = 2 p_min: ratio = 1/4, loss = 1 - 1/16.
  CHECK(loss_transform(1.0, 0.2, p_min, l_bound) == doctest::Approx(0.9375).epsilon(1e-15));
  // The largest admissible norm at pi drives the loss to 0.
  CHECK(loss_transform(l_bound, p_min, p_min, l_bound) == 0.0);
  CHECK_THROWS_AS(loss_transform(2.1, 0.5, p_min, l_bound), BoundViolationError);
  CHECK_THROWS_AS(loss_transform(1.0, 0.05, p_min, l_bound), ConfigError);  // pi < p_min
  CHECK_THROWS_AS(loss_transform(-1.0, 0.5, p_min, l_bound), ConfigError);
  CHECK_THROWS_AS(loss_transform(1.0, 0.5, 0.0, l_bound), ConfigError);
  CHECK_THROWS_AS(loss_transform(1.0, 0.5, p_min, 0.0), ConfigError);
}

TEST_CASE("weight update shrinks selected entries by exp(-k*gamma*ell/n)") {
  // Zero gradients make ell = 1 for every selected sample, so the
  // multiplier is exactly exp(-2 * 0.5 / 10) = exp(-0.1).
  BanditConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.5;
  cfg.l_bound = 1.0;
  const WeightVector w(10, 1.0);
  SplitRng rng(10);
  const SelectionResult sel = batch_selection(w, cfg, rng);
  std::map<int, double> norms;
  for (const int j : sel.indices) norms[j] = 0.0;

  const WeightVector updated = weight_update_cb(w, sel, norms, cfg);
  const double shrink = std::exp(-0.1);
  for (int i = 0; i < 10; ++i) {
    const bool selected = std::binary_search(sel.indices.begin(), sel.indices.end(), i);
    CHECK(updated[i] == (selected ? shrink : 1.0));
  }
}

TEST_CASE("a norm at the bound shrinks by the partial-information multiplier") {
  BanditConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.5;
  cfg.l_bound = 1.0;
  const WeightVector w = {1.0, 1.0, 1.0, 1.0};
  SplitRng rng(11);
  const SelectionResult sel = batch_selection(w, cfg, rng);
  std::map<int, double> norms;
  for (const int j : sel.indices) {
    // pi = 0.5, p_min = 0.25: ratio 1 needs norm = L * 0.5 / 0.25 = 2L > L.
    // Use the bound itself: ratio = 0.25 * 1 / 0.5 = 0.5, ell = 0.75.
    norms[j] = 1.0;
  }
  const WeightVector updated = weight_update_cb(w, sel, norms, cfg);
  const double shrink = std::exp(-2.0 * 0.5 * 0.75 / 4.0);
  for (const int j : sel.indices) CHECK(updated[j] == doctest::Approx(shrink).epsilon(1e-15));
}

TEST_CASE("capped entries are exempt from the weight update") {
  BanditConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.4;
  cfg.l_bound = 5.0;
  const WeightVector w = {1e9, 1.0, 1.0, 1.0, 1.0, 1.0};
  SplitRng rng(12);
  const SelectionResult sel = batch_selection(w, cfg, rng);
  REQUIRE(sel.null_set == std::vector<int>{0});

  std::map<int, double> norms;
  for (const int j : sel.indices) norms[j] = 0.0;
  const WeightVector updated = weight_update_cb(sel.capped_weights, sel, norms, cfg);
  CHECK(updated[0] == sel.capped_weights[0]);  // null-set entry untouched
}

TEST_CASE("weight update requires a bound and all selected norms") {
  BanditConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.5;
  const WeightVector w(4, 1.0);
  SplitRng rng(13);
  const SelectionResult sel = batch_selection(w, cfg, rng);

  std::map<int, double> norms;
  for (const int j : sel.indices) norms[j] = 0.0;
  CHECK_THROWS_AS(weight_update_cb(w, sel, norms, cfg), ContractError);  // no l_bound

  cfg.l_bound = 1.0;
  std::map<int, double> missing = norms;
  missing.erase(sel.indices.front());
  CHECK_THROWS_AS(weight_update_cb(w, sel, missing, cfg), ContractError);
}

TEST_CASE("unknown-bound update folds norms in before computing losses") {
  BanditConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.5;
  cfg.l_bound.reset();
  const WeightVector w(4, 1.0);
  SplitRng rng(14);
  const SelectionResult sel = batch_selection(w, cfg, rng);
  std::map<int, double> norms;
  double max_norm = 0.0;
  double v = 1.0;
  for (const int j : sel.indices) {
    norms[j] = v;
    max_norm = std::max(max_norm, v);
    v += 2.0;
  }

  const auto [updated, bound] = weight_update_cb_unknown_l(w, sel, norms, cfg, {});
  CHECK(bound.l == max_norm);
  CHECK_FALSE(bound.degenerate);

  BanditConfig known = cfg;
  known.l_bound = max_norm;
  CHECK(updated == weight_update_cb(w, sel, norms, known));
}

TEST_CASE("an all-zero first batch flags the degenerate bound") {
  RunningGradBound bound = update_grad_bound({}, {{0, 0.0}, {1, 0.0}});
  CHECK(bound.degenerate);
  CHECK(bound.l > 0.0);

  // Once any positive norm arrives, the flag never reappears.
  bound = update_grad_bound(bound, {{2, 3.0}});
  CHECK(bound.l == 3.0);
  bound = update_grad_bound(bound, {{3, 1.0}});
  CHECK(bound.l == 3.0);
  CHECK_THROWS_AS(update_grad_bound({}, {{0, -1.0}}), ContractError);
}

TEST_CASE("underflowing weights are rescued by rescaling") {
  BanditConfig cfg;
  cfg.k = 2;
  cfg.gamma = 0.5;
  cfg.l_bound = 1.0;
  const WeightVector w = {1e-160, 2e-160, 4e-160, 8e-160};
  SplitRng rng(15);
  const SelectionResult sel = batch_selection(w, cfg, rng);
  std::map<int, double> norms;
  for (const int j : sel.indices) norms[j] = 0.0;

  const WeightVector updated = weight_update_cb(w, sel, norms, cfg);
  const double max_w = *std::max_element(updated.begin(), updated.end());
  CHECK(max_w >= kWeightRescueFloor);
  // Ratios survive the rescale (up to the update multipliers themselves).
  const double shrink = std::exp(-0.25);
  for (int i = 0; i < 4; ++i) {
    const bool selected = std::binary_search(sel.indices.begin(), sel.indices.end(), i);
    const double expected = (w[i] / w[3]) * (selected ? shrink : 1.0);
    const bool last_selected = std::binary_search(sel.indices.begin(), sel.indices.end(), 3);
    const double denom = last_selected ? shrink : 1.0;
    CHECK(updated[i] / updated[3] == doctest::Approx(expected / denom).epsilon(1e-12));
  }
}

TEST_CASE("with-replacement probabilities are a mixture with the uniform") {
  const std::vector<double> p = bs_probabilities({3.0, 1.0}, 0.5);
  CHECK(p[0] == 0.625);
  CHECK(p[1] == 0.375);

  const std::vector<double> q = bs_probabilities({5.0, 1.0, 1.0, 1.0}, 0.2);
  double sum = 0.0;
  for (const double x : q) {
    CHECK(x >= 0.2 / 4);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("with-replacement sampling follows the distribution") {
  SplitRng rng(16);
  CHECK(sample_with_replacement({1.0, 0.0, 0.0}, 4, rng) == std::vector<int>{0, 0, 0, 0});

  const std::vector<double> p = {0.5, 0.5, 0.0, 0.0};
  std::vector<int> counts(4, 0);
  const int draws = 20000;
  for (int rep = 0; rep < draws; ++rep) {
    const std::vector<int> batch = sample_with_replacement(p, 3, rng);
    REQUIRE(batch.size() == 3);
    CHECK(std::is_sorted(batch.begin(), batch.end()));
    for (const int j : batch) ++counts[j];
  }
  CHECK(counts[2] == 0);
  CHECK(counts[3] == 0);
  // E[count_0] = 3 * 0.5 * draws = 30000, sigma ~ 122.
  CHECK(std::abs(counts[0] - 30000) < 1200);

  CHECK_THROWS_AS(sample_with_replacement({0.5, 0.4}, 2, rng), ConfigError);
  CHECK_THROWS_AS(sample_with_replacement({1.5, -0.5}, 2, rng), ConfigError);
}

TEST_CASE("count-corrected loss estimates average back to the loss") {
  CHECK(bs_loss_estimate(0.5, 2, 2, 0.25) == 2.0);
  CHECK(bs_loss_estimate(1.0, 1, 2, 0.5) == 1.0);
  CHECK_THROWS_AS(bs_loss_estimate(0.5, 0, 2, 0.25), ContractError);
  CHECK_THROWS_AS(bs_loss_estimate(0.5, 1, 2, 0.0), ContractError);
}

TEST_CASE("with-replacement weight update on a doubly drawn sample") {
  // Uniform weights over 4 samples at gamma = 0.5: p_j = 0.25. A zero
  // gradient gives ell = 1, the double draw gives ell_hat = 2/(2*0.25) = 4,
  // and the multiplier is exp(-0.5 * 4 / 4) = exp(-0.5).
  const WeightVector w(4, 1.0);
  const std::vector<double> p = bs_probabilities(w, 0.5);
  const std::vector<int> batch = {0, 0};
  const std::map<int, double> norms = {{0, 0.0}};
  const WeightVector updated = weight_update_bs(w, p, batch, norms, 0.5, 1.0);
  CHECK(updated[0] == std::exp(-0.5));
  CHECK(updated[1] == 1.0);
  CHECK(updated[2] == 1.0);
  CHECK(updated[3] == 1.0);
}

TEST_CASE("exploration rate follows the horizon formula") {
  // sqrt(n ln(n/k) / ((e-1) T k)) evaluated by hand for two points.
  const double g1 = exploration_gamma(10, 2, 1000);
  CHECK(g1 == doctest::Approx(std::sqrt(10.0 * std::log(5.0) /
                                        ((std::exp(1.0) - 1.0) * 1000.0 * 2.0)))
                  .epsilon(1e-15));
  CHECK(g1 == doctest::Approx(0.0684336).epsilon(1e-5));
  CHECK(exploration_gamma(3, 2, 100) == doctest::Approx(0.0594946).epsilon(1e-5));

  // Short horizons saturate at 1.
  CHECK(exploration_gamma(100, 2, 1) == 1.0);

  CHECK_THROWS_AS(exploration_gamma(2, 2, 100), ConfigError);
  CHECK_THROWS_AS(exploration_gamma(10, 2, 0), ConfigError);
}

TEST_CASE("bandit config validation") {
  BanditConfig cfg;
  cfg.k = 4;
  cfg.gamma = 0.4;
  CHECK_NOTHROW(validate_bandit_config(cfg, 10, true));

  cfg.k = 10;
  CHECK_THROWS_AS(validate_bandit_config(cfg, 10, true), ConfigError);
  cfg.k = 0;
  CHECK_THROWS_AS(validate_bandit_config(cfg, 10, true), ConfigError);

  cfg.k = 4;
  cfg.gamma = -0.1;
  CHECK_THROWS_AS(validate_bandit_config(cfg, 10, true), ConfigError);
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(validate_bandit_config(cfg, 10, true), ConfigError);
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(validate_bandit_config(cfg, 10, true), ConfigError);
  CHECK_NOTHROW(validate_bandit_config(cfg, 10, false));  // uniform-style use is fine

  cfg.gamma = 0.4;
  cfg.l_bound = -1.0;
  CHECK_THROWS_AS(validate_bandit_config(cfg, 10, true), ConfigError);
}

TEST_CASE("weights must be strictly positive and finite") {
  SplitRng rng(17);
  BanditConfig cfg;
  cfg.k = 1;
  cfg.gamma = 0.5;
  CHECK_THROWS_AS(batch_selection({1.0, 0.0, 1.0}, cfg, rng), ConfigError);
  CHECK_THROWS_AS(batch_selection({1.0, -2.0, 1.0}, cfg, rng), ConfigError);
  CHECK_THROWS_AS(batch_selection({}, cfg, rng), ConfigError);
}
