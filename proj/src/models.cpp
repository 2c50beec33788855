#include "adamcb/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adamcb/errors.hpp"

namespace adamcb {

namespace {

void check_dims(const PerSampleModel& model, std::span<const double> params,
                std::span<const double> x) {
  if (static_cast<int>(params.size()) != model.param_dim()) {
    throw ContractError(model.name() + ": parameter vector has size " +
                        std::to_string(params.size()) + ", expected " +
                        std::to_string(model.param_dim()));
  }
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw ContractError(model.name() + ": input has size " + std::to_string(x.size()) +
                        ", expected " + std::to_string(model.input_dim()));
  }
}

int check_class_label(double y, int classes, const std::string& who) {
  const double rounded = std::floor(y);
  if (rounded != y || y < 0.0 || y >= classes) {
    throw ContractError(who + ": label " + std::to_string(y) +
                        " is not a class index in [0, " + std::to_string(classes) + ")");
  }
  return static_cast<int>(rounded);
}

// log(sum exp(z)) and softmax, stabilised by the max trick.
double softmax_inplace(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return zmax + std::log(sum);  // log-sum-exp of the original logits
}

}  // namespace

LogisticModel::LogisticModel(int input_dim, int classes)
    : input_dim_(input_dim), classes_(classes) {
  if (input_dim < 1) throw ConfigError("logistic: input_dim must be >= 1");
  if (classes < 2) throw ConfigError("logistic: need at least 2 classes");
}

double LogisticModel::sample_loss(std::span<const double> params, std::span<const double> x,
                                  double y) const {
  check_dims(*this, params, x);
  const int label = check_class_label(y, classes_, name());
  std::vector<double> z(classes_);
  const double* bias = params.data() + classes_ * input_dim_;
  for (int c = 0; c < classes_; ++c) {
    const double* row = params.data() + c * input_dim_;
    double dot = bias[c];
    for (int u = 0; u < input_dim_; ++u) dot += row[u] * x[u];
    z[c] = dot;
  }
  const double label_logit = z[label];
  const double lse = softmax_inplace(z);
  return lse - label_logit;
}

LossGrad LogisticModel::sample_loss_grad(std::span<const double> params,
                                         std::span<const double> x, double y) const {
  check_dims(*this, params, x);
  const int label = check_class_label(y, classes_, name());
  std::vector<double> z(classes_);
  const double* bias = params.data() + classes_ * input_dim_;
  for (int c = 0; c < classes_; ++c) {
    const double* row = params.data() + c * input_dim_;
    double dot = bias[c];
    for (int u = 0; u < input_dim_; ++u) dot += row[u] * x[u];
    z[c] = dot;
  }
  const double label_logit = z[label];
  const double lse = softmax_inplace(z);  // z now holds the softmax

  LossGrad out;
  out.loss = lse - label_logit;
  out.grad.assign(param_dim(), 0.0);
  double* gw = out.grad.data();
  double* gb = out.grad.data() + classes_ * input_dim_;
  for (int c = 0; c < classes_; ++c) {
    const double coef = z[c] - (c == label ? 1.0 : 0.0);
    double* row = gw + c * input_dim_;
    for (int u = 0; u < input_dim_; ++u) row[u] = coef * x[u];
    gb[c] = coef;
  }
  return out;
}

std::vector<double> LogisticModel::initial_params(SplitRng& rng) const {
  (void)rng;  // convex objective: the zero vector is a canonical start
  return std::vector<double>(param_dim(), 0.0);
}

LinearRegressionModel::LinearRegressionModel(int input_dim) : input_dim_(input_dim) {
  if (input_dim < 1) throw ConfigError("linreg: input_dim must be >= 1");
}

double LinearRegressionModel::sample_loss(std::span<const double> params,
                                          std::span<const double> x, double y) const {
  check_dims(*this, params, x);
  double pred = 0.0;
  for (int u = 0; u < input_dim_; ++u) pred += params[u] * x[u];
  const double r = pred - y;
  return 0.5 * r * r;
}

LossGrad LinearRegressionModel::sample_loss_grad(std::span<const double> params,
                                                 std::span<const double> x, double y) const {
  check_dims(*this, params, x);
  double pred = 0.0;
  for (int u = 0; u < input_dim_; ++u) pred += params[u] * x[u];
  const double r = pred - y;
  LossGrad out;
  out.loss = 0.5 * r * r;
  out.grad.resize(input_dim_);
  for (int u = 0; u < input_dim_; ++u) out.grad[u] = r * x[u];
  return out;
}

std::vector<double> LinearRegressionModel::initial_params(SplitRng& rng) const {
  (void)rng;
  return std::vector<double>(param_dim(), 0.0);
}

MlpModel::MlpModel(MlpSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_dim < 1) throw ConfigError("mlp: input_dim must be >= 1");
  if (spec_.classes < 2) throw ConfigError("mlp: need at least 2 classes");
  sizes_.push_back(spec_.input_dim);
  for (const int h : spec_.hidden) {
    if (h < 1) throw ConfigError("mlp: hidden layer sizes must be >= 1");
    sizes_.push_back(h);
  }
  sizes_.push_back(spec_.classes);
  for (size_t l = 1; l < sizes_.size(); ++l) {
    param_dim_ += sizes_[l] * sizes_[l - 1] + sizes_[l];
  }
}

double MlpModel::sample_loss(std::span<const double> params, std::span<const double> x,
                             double y) const {
  return sample_loss_grad(params, x, y).loss;  // forward alone saves little at this scale
}

LossGrad MlpModel::sample_loss_grad(std::span<const double> params, std::span<const double> x,
                                    double y) const {
  check_dims(*this, params, x);
  const int label = check_class_label(y, spec_.classes, name());
  const int layers = static_cast<int>(sizes_.size()) - 1;

  // Forward pass, keeping every activation for backprop. activations[l]
  // is the input to layer l (activations[0] is x itself).
  std::vector<std::vector<double>> activations(layers + 1);
  activations[0].assign(x.begin(), x.end());
  int offset = 0;
  std::vector<int> layer_offsets(layers);
  for (int l = 0; l < layers; ++l) {
    layer_offsets[l] = offset;
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params.data() + offset;
    const double* b = params.data() + offset + out * in;
    offset += out * in + out;

    std::vector<double>& a = activations[l + 1];
    a.resize(out);
    for (int r = 0; r < out; ++r) {
      const double* row = w + r * in;
      double dot = b[r];
      for (int u = 0; u < in; ++u) dot += row[u] * activations[l][u];
      a[r] = (l + 1 < layers) ? std::max(dot, 0.0) : dot;  // ReLU on hidden only
    }
  }

  std::vector<double> softmax = activations[layers];
  const double lse = softmax_inplace(softmax);

  LossGrad result;
  result.loss = lse - activations[layers][label];
  result.grad.assign(param_dim_, 0.0);

  // Backward pass. delta holds dLoss/dz for the current layer.
  std::vector<double> delta(spec_.classes);
  for (int c = 0; c < spec_.classes; ++c) {
    delta[c] = softmax[c] - (c == label ? 1.0 : 0.0);
  }
  for (int l = layers - 1; l >= 0; --l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params.data() + layer_offsets[l];
    double* gw = result.grad.data() + layer_offsets[l];
    double* gb = gw + out * in;
    for (int r = 0; r < out; ++r) {
      const double d = delta[r];
      double* grow = gw + r * in;
      for (int u = 0; u < in; ++u) grow[u] = d * activations[l][u];
      gb[r] = d;
    }
    if (l == 0) break;
    std::vector<double> prev(in, 0.0);
    for (int r = 0; r < out; ++r) {
      const double d = delta[r];
      const double* row = w + r * in;
      for (int u = 0; u < in; ++u) prev[u] += d * row[u];
    }
    // ReLU gate: activations[l] is already max(z, 0), and the subgradient
    // at exactly 0 is taken as 0, so the stored activation decides.
    for (int u = 0; u < in; ++u) {
      if (activations[l][u] <= 0.0) prev[u] = 0.0;
    }
    delta = std::move(prev);
  }
  return result;
}

std::vector<double> MlpModel::initial_params(SplitRng& rng) const {
  std::vector<double> params(param_dim_, 0.0);
  const int layers = static_cast<int>(sizes_.size()) - 1;
  int offset = 0;
  for (int l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int u = 0; u < out * in; ++u) {
      params[offset + u] = rng.uniform(-bound, bound);
    }
    offset += out * in + out;  // biases stay 0
  }
  return params;
}

std::vector<double> finite_difference_gradient(const PerSampleModel& model,
                                               std::vector<double> params,
                                               std::span<const double> x, double y,
                                               double step) {
  if (!(step > 0.0)) throw ConfigError("finite_difference_gradient: step must be positive");
  std::vector<double> grad(params.size());
  for (size_t u = 0; u < params.size(); ++u) {
    const double saved = params[u];
    params[u] = saved + step;
    const double up = model.sample_loss(params, x, y);
    params[u] = saved - step;
    const double down = model.sample_loss(params, x, y);
    params[u] = saved;
    grad[u] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace adamcb
