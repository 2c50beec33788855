#include "adamcb/gradient.hpp"

#include <cmath>
#include <string>

#include "adamcb/errors.hpp"

namespace adamcb {

std::map<int, double> BatchGradients::norms() const {
  std::map<int, double> out;
  for (const auto& [idx, sg] : per_index) out.emplace(idx, sg.norm);
  return out;
}

BatchGradients compute_batch_gradients(const PerSampleModel& model,
                                       const std::vector<double>& params,
                                       const Dataset& data, const std::vector<int>& indices) {
  BatchGradients batch;
  for (const int i : indices) {
    if (i < 0 || i >= data.n) {
      throw ContractError("compute_batch_gradients: index " + std::to_string(i) +
                          " outside dataset of size " + std::to_string(data.n));
    }
    if (batch.per_index.count(i)) continue;
    SampleGradient sg;
    LossGrad lg = model.sample_loss_grad(params, data.row(i), data.labels[i]);
    sg.grad = std::move(lg.grad);
    double sq = 0.0;
    for (const double g : sg.grad) sq += g * g;
    sg.norm = std::sqrt(sq);
    batch.per_index.emplace(i, std::move(sg));
  }
  return batch;
}

std::vector<double> unbiased_gradient(const BatchGradients& batch,
                                      const SelectionProbabilities& probs, int n) {
  if (n < 1) throw ContractError("unbiased_gradient: need n >= 1");
  if (batch.per_index.empty()) throw ContractError("unbiased_gradient: empty batch");

  std::vector<double> out;
  for (const auto& [j, sg] : batch.per_index) {
    if (j >= static_cast<int>(probs.values.size())) {
      throw ContractError("unbiased_gradient: no probability for index " + std::to_string(j));
    }
    const double pi = probs.values[j];
    if (!(pi > 0.0)) {
      throw ContractError("unbiased_gradient: probability for index " + std::to_string(j) +
                          " is not positive");
    }
    if (out.empty()) {
      out.assign(sg.grad.size(), 0.0);
    } else if (out.size() != sg.grad.size()) {
      throw ContractError("unbiased_gradient: inconsistent gradient dimensions");
    }
    const double scale = 1.0 / (static_cast<double>(n) * pi);
    for (size_t u = 0; u < out.size(); ++u) out[u] += scale * sg.grad[u];
  }
  return out;
}

std::vector<double> full_gradient(const PerSampleModel& model,
                                  const std::vector<double>& params, const Dataset& data) {
  if (data.n < 1) throw ContractError("full_gradient: empty dataset");
  std::vector<double> out(model.param_dim(), 0.0);
  for (int i = 0; i < data.n; ++i) {
    const LossGrad lg = model.sample_loss_grad(params, data.row(i), data.labels[i]);
    for (size_t u = 0; u < out.size(); ++u) out[u] += lg.grad[u];
  }
  for (double& g : out) g /= data.n;
  return out;
}

double full_loss(const PerSampleModel& model, const std::vector<double>& params,
                 const Dataset& data) {
  if (data.n < 1) throw ContractError("full_loss: empty dataset");
  double sum = 0.0;
  for (int i = 0; i < data.n; ++i) {
    sum += model.sample_loss(params, data.row(i), data.labels[i]);
  }
  return sum / data.n;
}

}  // namespace adamcb
