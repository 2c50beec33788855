#pragma once

#include <span>
#include <string>
#include <vector>

#include "adamcb/rng.hpp"

namespace adamcb {

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// A differentiable per-sample objective f(theta; x, y). Parameters live in
// one flat vector (layer by layer, weight matrix row-major, then bias) so
// the optimizers stay model-agnostic.
class PerSampleModel {
 public:
  virtual ~PerSampleModel() = default;
  virtual int param_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual std::string name() const = 0;
  virtual double sample_loss(std::span<const double> params, std::span<const double> x,
                             double y) const = 0;
  virtual LossGrad sample_loss_grad(std::span<const double> params, std::span<const double> x,
                                    double y) const = 0;
  // Deterministic given the rng stream. Convex models start at zero; the
  // MLP draws symmetric uniform fan-in weights.
  virtual std::vector<double> initial_params(SplitRng& rng) const = 0;
};

// Multinomial logistic regression with softmax cross-entropy. Parameters:
// weight matrix (classes x input_dim, row-major) followed by biases.
class LogisticModel : public PerSampleModel {
 public:
  LogisticModel(int input_dim, int classes);
  int param_dim() const override { return classes_ * (input_dim_ + 1); }
  int input_dim() const override { return input_dim_; }
  int classes() const { return classes_; }
  std::string name() const override { return "logistic"; }
  double sample_loss(std::span<const double> params, std::span<const double> x,
                     double y) const override;
  LossGrad sample_loss_grad(std::span<const double> params, std::span<const double> x,
                            double y) const override;
  std::vector<double> initial_params(SplitRng& rng) const override;

 private:
  int input_dim_;
  int classes_;
};

// Least squares on a linear predictor theta . x (no intercept):
// loss = 0.5 * (theta.x - y)^2.
class LinearRegressionModel : public PerSampleModel {
 public:
  explicit LinearRegressionModel(int input_dim);
  int param_dim() const override { return input_dim_; }
  int input_dim() const override { return input_dim_; }
  std::string name() const override { return "linreg"; }
  double sample_loss(std::span<const double> params, std::span<const double> x,
                     double y) const override;
  LossGrad sample_loss_grad(std::span<const double> params, std::span<const double> x,
                            double y) const override;
  std::vector<double> initial_params(SplitRng& rng) const override;

 private:
  int input_dim_;
};

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;  // e.g. {32, 16}
  int classes = 0;
};

// Fully connected net: ReLU on every hidden layer, softmax cross-entropy
// on the output. Gradients are exact manual backprop; the ReLU subgradient
// at 0 is taken as 0.
class MlpModel : public PerSampleModel {
 public:
  explicit MlpModel(MlpSpec spec);
  int param_dim() const override { return param_dim_; }
  int input_dim() const override { return spec_.input_dim; }
  const MlpSpec& spec() const { return spec_; }
  std::string name() const override { return "mlp"; }
  double sample_loss(std::span<const double> params, std::span<const double> x,
                     double y) const override;
  LossGrad sample_loss_grad(std::span<const double> params, std::span<const double> x,
                            double y) const override;
  std::vector<double> initial_params(SplitRng& rng) const override;

 private:
  MlpSpec spec_;
  std::vector<int> sizes_;  // input_dim, hidden..., classes
  int param_dim_ = 0;
};

// Central-difference gradient, the oracle the analytic gradients are
// checked against: (f(theta + h e_u) - f(theta - h e_u)) / (2h) per
// coordinate. Requires step > 0.
std::vector<double> finite_difference_gradient(const PerSampleModel& model,
                                               std::vector<double> params,
                                               std::span<const double> x, double y,
                                               double step);

}  // namespace adamcb
