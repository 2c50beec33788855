#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adamcb/data.hpp"
#include "adamcb/models.hpp"
#include "adamcb/optim.hpp"

namespace adamcb {

struct DatasetConfig {
  std::string kind;  // synthetic | csv | idx
  // synthetic
  int n = 1000;
  int d = 20;
  int classes = 2;
  double heterogeneity = 0.0;
  uint64_t seed = 1;
  // csv
  std::string path;
  std::string label_column = "label";
  TaskKind task = TaskKind::kClassification;
  // idx
  std::string images;
  std::string labels;
  std::string test_images;  // explicit test pair wins over test_fraction
  std::string test_labels;
  std::optional<int> limit;
  // split (ignored when an explicit idx test pair is given)
  double test_fraction = 0.2;  // 0 means: no held-out split
  uint64_t split_seed = 1;
};

struct ModelConfig {
  std::string kind;          // logistic | linreg | mlp
  std::vector<int> hidden = {32, 16};  // mlp only
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<uint64_t> seeds = {1};
  std::optional<int> epochs;   // exactly one of epochs / t_total
  std::optional<int> t_total;
  int eval_every = 0;          // 0: once per epoch
  std::string output_dir = "runs";
  std::string fstar_method = "auto";  // auto | closed_form | long_run_gd | none
  int fstar_gd_iters = 50000;
  DatasetConfig dataset;
  ModelConfig model;
  std::vector<OptimizerConfig> optimizers;
};

// Parses the line-oriented `key = value` format with [section] headers
// ([experiment], [dataset], [model], and one [optimizer] per optimizer).
// Unknown sections or keys are errors naming the offender and line.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// Dataset and model assembly from a parsed config.
Dataset load_dataset(const DatasetConfig& cfg);
std::unique_ptr<PerSampleModel> build_model(const ModelConfig& cfg, const Dataset& data);

enum class FStarMethod { kClosedForm, kLongRunGd };

// Reference optimal training loss for the regret proxy. Closed form
// solves the least-squares normal equations (linear regression only,
// falling back to gradient descent with a warning if they are singular);
// the generic path is full-batch gradient descent with alpha_t = a0/sqrt(t)
// for `gd_iters` iterations, returning the best loss seen.
double estimate_f_star(const PerSampleModel& model, const Dataset& data, FStarMethod method,
                       int gd_iters);

// Cumulative clamped optimality gaps: out[i] = sum_{j<=i} max(0, losses[j] - f_star).
// A non-finite f_star (no reference available) yields all-NaN output.
std::vector<double> regret_proxy(const std::vector<double>& losses, double f_star);

struct VariantSummary {
  std::string optimizer;
  double final_train_loss_mean = 0.0;
  double final_train_loss_std = 0.0;
  double final_test_loss_mean = 0.0;
  double final_test_loss_std = 0.0;
  int diverged_runs = 0;
  int runs = 0;
};

struct ExperimentResult {
  std::vector<std::string> run_files;
  std::string aggregate_file;
  std::vector<VariantSummary> summaries;
  std::vector<Trajectory> trajectories;
  double f_star = 0.0;
  std::string resolved_output_dir;
};

// Runs every (optimizer, seed) pair sequentially, writing one CSV per run
// (columns: optimizer,seed,epoch,iter,train_loss,test_loss,regret,wall_ms,
// diverged) plus an aggregate CSV of per-eval-point means and sample
// standard deviations across seeds. Diverged runs are recorded and
// excluded from aggregates; they never abort the experiment.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// The configured output directory, nested under $ADAMCB_OUTPUT_ROOT when
// that is set and the directory is relative.
std::string resolve_output_dir(const std::string& configured);

inline constexpr const char* kOutputRootEnvVar = "ADAMCB_OUTPUT_ROOT";

}  // namespace adamcb
