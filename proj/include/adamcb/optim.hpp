#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adamcb/bandit.hpp"
#include "adamcb/data.hpp"
#include "adamcb/gradient.hpp"
#include "adamcb/models.hpp"
#include "adamcb/rng.hpp"

namespace adamcb {

enum class Variant { kAdam, kAdamX, kAdamBS, kAdamCB };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

enum class AlphaSchedule { kConstant, kInverseSqrt };

struct OptimizerConfig {
  Variant variant = Variant::kAdamCB;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lambda = 1.0 - 1e-8;  // decay of beta1 over iterations
  double epsilon = 1e-8;
  AlphaSchedule alpha_mode = AlphaSchedule::kConstant;
  BanditConfig bandit;         // k, gamma, l_bound; k is the batch size for all variants
  std::string display_name;    // defaults to variant_name(variant)
};

// Range checks; n is the training-set size (pass 0 to skip the k < n
// check). The beta1/sqrt(beta2) <= 1 condition is required when the
// decaying step schedule is selected.
void validate_optimizer_config(const OptimizerConfig& cfg, int n);

// First and second moment accumulators plus the running maximum v_hat that
// keeps the effective step size monotone.
struct MomentState {
  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> v_hat;
  int t = 0;  // completed iterations

  static MomentState zeros(int dim);
};

// beta1 * lambda^(t-1), the decaying first-moment coefficient.
double beta1_schedule(double beta1, double lambda, int t);
// alpha (constant) or alpha / sqrt(t).
double alpha_schedule(double alpha, int t, AlphaSchedule mode);

// One moment update under the decaying-beta1 rules: after the usual
// exponential averages, v_hat ratchets up via
//   v_hat_t = max(((1-b1_t)^2 / (1-b1_{t-1})^2) * v_hat_{t-1}, v_t),
// with v_hat_1 = v_1. Requires t == state.t + 1.
MomentState adamx_moment_update(const MomentState& state, const std::vector<double>& g,
                                const OptimizerConfig& cfg, int t);

// theta - alpha_t * m / (sqrt(v_hat) + epsilon), elementwise.
std::vector<double> parameter_update(const std::vector<double>& theta,
                                     const MomentState& state, double alpha_t,
                                     double epsilon);

struct PlainStepResult {
  std::vector<double> theta;
  MomentState state;
};

// Classic Adam with bias correction on an externally supplied gradient.
PlainStepResult plain_adam_step(const std::vector<double>& theta, const MomentState& state,
                                const std::vector<double>& g, const OptimizerConfig& cfg,
                                int t);

// Adam/AdamX step on a given batch (mean minibatch gradient). Picks the
// moment rule from cfg.variant.
PlainStepResult uniform_step_with_batch(const std::vector<double>& theta,
                                        const MomentState& state, const PerSampleModel& model,
                                        const Dataset& data, const OptimizerConfig& cfg, int t,
                                        const std::vector<int>& batch);

struct UniformStepResult {
  std::vector<double> theta;
  MomentState state;
  std::vector<int> batch;  // k distinct indices, ascending
};

// Samples a uniform k-subset without replacement, then runs
// uniform_step_with_batch.
UniformStepResult uniform_step(const std::vector<double>& theta, const MomentState& state,
                               const PerSampleModel& model, const Dataset& data,
                               const OptimizerConfig& cfg, SplitRng& rng, int t);

struct CbStepResult {
  std::vector<double> theta;
  MomentState state;
  WeightVector weights;
  SelectionResult selection;
  RunningGradBound bound;
};

// One full combinatorial-bandit iteration: batch selection over the
// weights, importance-weighted gradient, decaying-beta1 moment update,
// parameter step, then the exponential weight update. `bound` carries the
// running gradient-norm maximum when cfg.bandit.l_bound is unset.
CbStepResult adamcb_step(const std::vector<double>& theta, const MomentState& state,
                         const WeightVector& weights, const PerSampleModel& model,
                         const Dataset& data, const OptimizerConfig& cfg, SplitRng& rng,
                         int t, RunningGradBound bound);

struct BsStepResult {
  std::vector<double> theta;
  MomentState state;
  WeightVector weights;
  std::vector<int> batch;  // multiset of k draws, ascending
  RunningGradBound bound;
};

// One with-replacement bandit iteration: k categorical draws, the
// count-corrected importance losses, and the same moment rules.
BsStepResult adambs_step(const std::vector<double>& theta, const MomentState& state,
                         const WeightVector& weights, const PerSampleModel& model,
                         const Dataset& data, const OptimizerConfig& cfg, SplitRng& rng,
                         int t, RunningGradBound bound);

struct EvalRecord {
  int t = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;   // NaN when no test set was given
  double wall_ms = 0.0;     // cumulative since run start
  uint64_t theta_hash = 0;  // FNV-1a over the raw parameter bytes (diagnostic)
  int null_set_size = 0;    // capped indices at this iteration (adamcb only)
};

struct Trajectory {
  std::string optimizer;
  uint64_t seed = 0;
  std::vector<EvalRecord> evals;
  bool diverged = false;
  int diverged_at = 0;           // iteration of the divergence record
  double resolved_gamma = 0.0;   // after GammaMode::kTheoretical resolution
  bool degenerate_l_warning = false;
  std::vector<double> final_theta;
  WeightVector final_weights;    // bandit variants only
};

// Runs t_total iterations from the canonical start (zero moments, unit
// weights, model-defined theta_0), evaluating full train/test loss every
// eval_every iterations and at t_total. A run whose loss exceeds 1e6 or
// stops being finite is cut short and flagged, not thrown. All randomness
// descends from `seed` via labelled substreams, so a rerun with the same
// arguments reproduces the trajectory bit for bit.
Trajectory run_optimizer(const PerSampleModel& model, const Dataset& train,
                         const Dataset& test, const OptimizerConfig& cfg, uint64_t seed,
                         int t_total, int eval_every);

// Iterations that make up one pass over n samples in batches of k.
int iterations_per_epoch(int n, int k);

inline constexpr double kDivergenceLossLimit = 1e6;

}  // namespace adamcb
