#pragma once

#include <map>
#include <vector>

#include "adamcb/bandit.hpp"
#include "adamcb/data.hpp"
#include "adamcb/models.hpp"

namespace adamcb {

struct SampleGradient {
  std::vector<double> grad;
  double norm = 0.0;  // Euclidean norm of grad
};

// Per-sample gradients for one batch, keyed by dataset index (so
// duplicate indices in a multiset cost one evaluation).
struct BatchGradients {
  std::map<int, SampleGradient> per_index;
  std::map<int, double> norms() const;
};

BatchGradients compute_batch_gradients(const PerSampleModel& model,
                                       const std::vector<double>& params,
                                       const Dataset& data, const std::vector<int>& indices);

// Importance-weighted combination sum_j g_j / (n * pi_j) over the batch.
// With inclusion marginals pi this estimates the full-dataset mean
// gradient without bias; pi_j >= k*gamma/n > 0 bounds the norm by
// (max per-sample norm) / gamma.
std::vector<double> unbiased_gradient(const BatchGradients& batch,
                                      const SelectionProbabilities& probs, int n);

// Mean per-sample gradient / loss over the whole dataset.
std::vector<double> full_gradient(const PerSampleModel& model,
                                  const std::vector<double>& params, const Dataset& data);
double full_loss(const PerSampleModel& model, const std::vector<double>& params,
                 const Dataset& data);

}  // namespace adamcb
