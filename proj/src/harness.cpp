#include "adamcb/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "adamcb/errors.hpp"
#include "adamcb/gradient.hpp"

namespace adamcb {

namespace {

std::string trim(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t");
  size_t end = s.find_last_not_of(" \t");
  if (begin == std::string::npos) return "";
  return s.substr(begin, end - begin + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (const char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

// One key = value assignment, tagged with where it came from.
struct Entry {
  std::string key;
  std::string value;
  int line = 0;
  bool used = false;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

std::vector<Section> tokenize(const std::string& text, const std::string& origin) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + " line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      Section s;
      s.name = trim(line.substr(1, line.size() - 2));
      s.line = line_no;
      sections.push_back(std::move(s));
      continue;
    }

    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": expected 'key = value' or '[section]'");
    }
    if (sections.empty()) {
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": assignment before any [section] header");
    }
    Entry e;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty()) {
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key");
    }
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

// Typed accessors over one section's entries.
class SectionReader {
 public:
  SectionReader(Section& section, const std::string& origin)
      : section_(section), origin_(origin) {}

  Entry* find(const std::string& key) {
    for (Entry& e : section_.entries) {
      if (e.key == key) {
        e.used = true;
        return &e;
      }
    }
    return nullptr;
  }

  std::optional<std::string> get_string(const std::string& key) {
    Entry* e = find(key);
    if (!e) return std::nullopt;
    return e->value;
  }

  std::optional<double> get_double(const std::string& key) {
    Entry* e = find(key);
    if (!e) return std::nullopt;
    return parse_double(*e);
  }

  std::optional<int> get_int(const std::string& key) {
    Entry* e = find(key);
    if (!e) return std::nullopt;
    return parse_int(*e);
  }

  std::optional<bool> get_bool(const std::string& key) {
    Entry* e = find(key);
    if (!e) return std::nullopt;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    throw ConfigError(where(*e) + ": expected true or false, got '" + e->value + "'");
  }

  std::optional<std::vector<int>> get_int_list(const std::string& key) {
    Entry* e = find(key);
    if (!e) return std::nullopt;
    std::vector<int> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      Entry fake{e->key, trim(item), e->line, true};
      out.push_back(parse_int(fake));
    }
    if (out.empty()) throw ConfigError(where(*e) + ": empty list");
    return out;
  }

  std::optional<std::vector<uint64_t>> get_u64_list(const std::string& key) {
    Entry* e = find(key);
    if (!e) return std::nullopt;
    std::vector<uint64_t> out;
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string v = trim(item);
      try {
        size_t pos = 0;
        const uint64_t parsed = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        out.push_back(parsed);
      } catch (const std::exception&) {
        throw ConfigError(where(*e) + ": '" + v + "' is not a non-negative integer");
      }
    }
    if (out.empty()) throw ConfigError(where(*e) + ": empty list");
    return out;
  }

  void reject_unused() const {
    for (const Entry& e : section_.entries) {
      if (!e.used) {
        throw ConfigError(where(e) + ": unknown key '" + e.key + "' in [" + section_.name +
                          "]");
      }
    }
  }

  std::string where(const Entry& e) const {
    return origin_ + " line " + std::to_string(e.line);
  }

 private:
  double parse_double(const Entry& e) {
    const char* begin = e.value.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v)) {
      throw ConfigError(where(e) + ": '" + e.value + "' is not a number");
    }
    return v;
  }

  int parse_int(const Entry& e) {
    try {
      size_t pos = 0;
      const long v = std::stol(e.value, &pos);
      if (pos != e.value.size()) throw std::invalid_argument(e.value);
      return static_cast<int>(v);
    } catch (const std::exception&) {
      throw ConfigError(where(e) + ": '" + e.value + "' is not an integer");
    }
  }

  Section& section_;
  const std::string& origin_;
};

void read_experiment(SectionReader& r, ExperimentConfig& cfg) {
  if (auto v = r.get_string("name")) {
    if (!valid_name(*v)) {
      throw ConfigError("experiment name '" + *v +
                        "' must use only letters, digits, '_' or '-'");
    }
    cfg.name = *v;
  }
  if (auto v = r.get_u64_list("seeds")) cfg.seeds = *v;
  if (auto v = r.get_int("epochs")) cfg.epochs = *v;
  if (auto v = r.get_int("t_total")) cfg.t_total = *v;
  if (auto v = r.get_int("eval_every")) cfg.eval_every = *v;
  if (auto v = r.get_string("output_dir")) cfg.output_dir = *v;
  if (auto v = r.get_string("fstar_method")) cfg.fstar_method = *v;
  if (auto v = r.get_int("fstar_gd_iters")) cfg.fstar_gd_iters = *v;
  r.reject_unused();
}

void read_dataset(SectionReader& r, DatasetConfig& cfg) {
  if (auto v = r.get_string("kind")) cfg.kind = *v;
  if (auto v = r.get_int("n")) cfg.n = *v;
  if (auto v = r.get_int("d")) cfg.d = *v;
  if (auto v = r.get_int("classes")) cfg.classes = *v;
  if (auto v = r.get_double("heterogeneity")) cfg.heterogeneity = *v;
  if (auto v = r.get_int("seed")) cfg.seed = static_cast<uint64_t>(*v);
  if (auto v = r.get_string("path")) cfg.path = *v;
  if (auto v = r.get_string("label_column")) cfg.label_column = *v;
  if (auto v = r.get_string("task")) {
    if (*v == "classification") {
      cfg.task = TaskKind::kClassification;
    } else if (*v == "regression") {
      cfg.task = TaskKind::kRegression;
    } else {
      throw ConfigError("dataset task must be classification or regression, got '" + *v + "'");
    }
  }
  if (auto v = r.get_string("images")) cfg.images = *v;
  if (auto v = r.get_string("labels")) cfg.labels = *v;
  if (auto v = r.get_string("test_images")) cfg.test_images = *v;
  if (auto v = r.get_string("test_labels")) cfg.test_labels = *v;
  if (auto v = r.get_int("limit")) cfg.limit = *v;
  if (auto v = r.get_double("test_fraction")) cfg.test_fraction = *v;
  if (auto v = r.get_int("split_seed")) cfg.split_seed = static_cast<uint64_t>(*v);
  r.reject_unused();
}

void read_model(SectionReader& r, ModelConfig& cfg) {
  if (auto v = r.get_string("kind")) cfg.kind = *v;
  if (auto v = r.get_int_list("hidden")) cfg.hidden = *v;
  r.reject_unused();
}

OptimizerConfig read_optimizer(SectionReader& r) {
  OptimizerConfig cfg;
  const auto variant = r.get_string("variant");
  if (!variant) throw ConfigError("[optimizer] section is missing the 'variant' key");
  cfg.variant = variant_from_name(*variant);
  cfg.display_name = variant_name(cfg.variant);

  if (auto v = r.get_string("name")) {
    if (!valid_name(*v)) {
      throw ConfigError("optimizer name '" + *v +
                        "' must use only letters, digits, '_' or '-'");
    }
    cfg.display_name = *v;
  }
  if (auto v = r.get_double("alpha")) cfg.alpha = *v;
  if (auto v = r.get_double("beta1")) cfg.beta1 = *v;
  if (auto v = r.get_double("beta2")) cfg.beta2 = *v;
  if (auto v = r.get_double("lambda")) cfg.lambda = *v;
  if (auto v = r.get_double("epsilon")) cfg.epsilon = *v;
  if (auto v = r.get_int("k")) cfg.bandit.k = *v;
  if (Entry* e = r.find("gamma")) {
    if (e->value == "theoretical") {
      cfg.bandit.gamma_mode = GammaMode::kTheoretical;
    } else {
      const char* begin = e->value.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin || *end != '\0' || !(v >= 0.0 && v < 1.0)) {
        throw ConfigError(r.where(*e) + ": gamma must be a number in [0, 1) or 'theoretical'");
      }
      cfg.bandit.gamma = v;
    }
  }
  if (Entry* e = r.find("l_bound")) {
    if (e->value == "unknown") {
      cfg.bandit.l_bound.reset();
    } else {
      const char* begin = e->value.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin || *end != '\0' || !(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(r.where(*e) + ": l_bound must be a positive number or 'unknown'");
      }
      cfg.bandit.l_bound = v;
    }
  }
  if (auto v = r.get_string("alpha_schedule")) {
    if (*v == "constant") {
      cfg.alpha_mode = AlphaSchedule::kConstant;
    } else if (*v == "inverse_sqrt") {
      cfg.alpha_mode = AlphaSchedule::kInverseSqrt;
    } else {
      throw ConfigError("alpha_schedule must be constant or inverse_sqrt, got '" + *v + "'");
    }
  }
  if (auto v = r.get_bool("cap_persist")) cfg.bandit.persist_capped_weights = *v;
  r.reject_unused();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  std::vector<Section> sections = tokenize(text, origin);

  ExperimentConfig cfg;
  bool saw_dataset = false;
  bool saw_model = false;
  for (Section& section : sections) {
    SectionReader reader(section, origin);
    if (section.name == "experiment") {
      read_experiment(reader, cfg);
    } else if (section.name == "dataset") {
      saw_dataset = true;
      read_dataset(reader, cfg.dataset);
    } else if (section.name == "model") {
      saw_model = true;
      read_model(reader, cfg.model);
    } else if (section.name == "optimizer") {
      cfg.optimizers.push_back(read_optimizer(reader));
    } else {
      throw ConfigError(origin + " line " + std::to_string(section.line) +
                        ": unknown section [" + section.name + "]");
    }
  }

  if (!saw_dataset) throw ConfigError(origin + ": missing [dataset] section");
  if (!saw_model) throw ConfigError(origin + ": missing [model] section");
  if (cfg.optimizers.empty()) {
    throw ConfigError(origin + ": config declares no [optimizer] sections");
  }
  if (cfg.seeds.empty()) throw ConfigError(origin + ": seeds list is empty");
  if (cfg.epochs && cfg.t_total) {
    throw ConfigError(origin + ": give either epochs or t_total, not both");
  }
  if (!cfg.epochs && !cfg.t_total) cfg.epochs = 10;
  if (cfg.epochs && *cfg.epochs < 1) throw ConfigError(origin + ": epochs must be >= 1");
  if (cfg.t_total && *cfg.t_total < 1) throw ConfigError(origin + ": t_total must be >= 1");
  if (cfg.eval_every < 0) throw ConfigError(origin + ": eval_every must be >= 1");
  if (cfg.fstar_method != "auto" && cfg.fstar_method != "closed_form" &&
      cfg.fstar_method != "long_run_gd" && cfg.fstar_method != "none") {
    throw ConfigError(origin + ": fstar_method must be auto, closed_form, long_run_gd or none");
  }
  if (cfg.fstar_gd_iters < 1) throw ConfigError(origin + ": fstar_gd_iters must be >= 1");
  if (!(cfg.dataset.test_fraction >= 0.0 && cfg.dataset.test_fraction < 1.0)) {
    throw ConfigError(origin + ": test_fraction must lie in [0, 1)");
  }

  if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "csv" &&
      cfg.dataset.kind != "idx") {
    throw ConfigError(origin + ": dataset kind must be synthetic, csv or idx (got '" +
                      cfg.dataset.kind + "')");
  }
  if (cfg.dataset.kind == "csv" && cfg.dataset.path.empty()) {
    throw ConfigError(origin + ": csv dataset needs a path");
  }
  if (cfg.dataset.kind == "idx" &&
      (cfg.dataset.images.empty() || cfg.dataset.labels.empty())) {
    throw ConfigError(origin + ": idx dataset needs images and labels paths");
  }
  if (cfg.model.kind != "logistic" && cfg.model.kind != "linreg" && cfg.model.kind != "mlp") {
    throw ConfigError(origin + ": model kind must be logistic, linreg or mlp (got '" +
                      cfg.model.kind + "')");
  }

  // Duplicate run names would silently overwrite each other's CSVs.
  std::vector<std::string> names;
  for (const OptimizerConfig& opt : cfg.optimizers) names.push_back(opt.display_name);
  std::sort(names.begin(), names.end());
  const auto dup = std::adjacent_find(names.begin(), names.end());
  if (dup != names.end()) {
    throw ConfigError(origin + ": two optimizers are both named '" + *dup +
                      "'; give one a distinct name = ... key");
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

Dataset load_dataset(const DatasetConfig& cfg) {
  if (cfg.kind == "synthetic") {
    return gen_synthetic_classification(cfg.seed, cfg.n, cfg.d, cfg.classes,
                                        cfg.heterogeneity);
  }
  if (cfg.kind == "csv") {
    if (cfg.path.empty()) throw ConfigError("csv dataset needs 'path'");
    return load_csv(cfg.path, cfg.label_column, cfg.task);
  }
  if (cfg.kind == "idx") {
    if (cfg.images.empty() || cfg.labels.empty()) {
      throw ConfigError("idx dataset needs 'images' and 'labels'");
    }
    return load_idx_pair(cfg.images, cfg.labels, cfg.limit);
  }
  throw ConfigError("unknown dataset kind '" + cfg.kind + "'");
}

std::unique_ptr<PerSampleModel> build_model(const ModelConfig& cfg, const Dataset& data) {
  if (cfg.kind == "linreg") {
    return std::make_unique<LinearRegressionModel>(data.d);
  }
  if (data.kind != TaskKind::kClassification) {
    throw ConfigError("model kind '" + cfg.kind + "' needs a classification dataset");
  }
  const int classes = data.classes();
  if (classes < 2) {
    throw ConfigError("dataset has fewer than 2 distinct classes");
  }
  if (cfg.kind == "logistic") {
    return std::make_unique<LogisticModel>(data.d, classes);
  }
  if (cfg.kind == "mlp") {
    MlpSpec spec;
    spec.input_dim = data.d;
    spec.hidden = cfg.hidden;
    spec.classes = classes;
    return std::make_unique<MlpModel>(spec);
  }
  throw ConfigError("unknown model kind '" + cfg.kind + "'");
}

namespace {

// Least-squares optimum via the normal equations, solved by Gaussian
// elimination with partial pivoting. Returns nothing when the system is
// numerically singular.
std::optional<std::vector<double>> solve_normal_equations(const Dataset& data) {
  const int d = data.d;
  std::vector<double> a(static_cast<size_t>(d) * d, 0.0);  // X^T X
  std::vector<double> b(d, 0.0);                           // X^T y
  for (int i = 0; i < data.n; ++i) {
    const std::span<const double> x = data.row(i);
    for (int r = 0; r < d; ++r) {
      b[r] += x[r] * data.labels[i];
      for (int c = r; c < d; ++c) a[static_cast<size_t>(r) * d + c] += x[r] * x[c];
    }
  }
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < r; ++c) {
      a[static_cast<size_t>(r) * d + c] = a[static_cast<size_t>(c) * d + r];
    }
  }

  double scale = 0.0;
  for (const double v : a) scale = std::max(scale, std::abs(v));
  const double tiny = 1e-12 * std::max(scale, 1.0);

  for (int col = 0; col < d; ++col) {
    int pivot = col;
    for (int r = col + 1; r < d; ++r) {
      if (std::abs(a[static_cast<size_t>(r) * d + col]) >
          std::abs(a[static_cast<size_t>(pivot) * d + col])) {
        pivot = r;
      }
    }
    if (std::abs(a[static_cast<size_t>(pivot) * d + col]) < tiny) return std::nullopt;
    if (pivot != col) {
      for (int c = 0; c < d; ++c) {
        std::swap(a[static_cast<size_t>(pivot) * d + c], a[static_cast<size_t>(col) * d + c]);
      }
      std::swap(b[pivot], b[col]);
    }
    for (int r = col + 1; r < d; ++r) {
      const double f = a[static_cast<size_t>(r) * d + col] / a[static_cast<size_t>(col) * d + col];
      if (f == 0.0) continue;
      for (int c = col; c < d; ++c) {
        a[static_cast<size_t>(r) * d + c] -= f * a[static_cast<size_t>(col) * d + c];
      }
      b[r] -= f * b[col];
    }
  }
  std::vector<double> theta(d, 0.0);
  for (int r = d - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < d; ++c) acc -= a[static_cast<size_t>(r) * d + c] * theta[c];
    theta[r] = acc / a[static_cast<size_t>(r) * d + r];
  }
  return theta;
}

double long_run_gd_loss(const PerSampleModel& model, const Dataset& data, int iters) {
  SplitRng init_rng = SplitRng(12345).split("fstar-init");
  std::vector<double> theta = model.initial_params(init_rng);
  double best = full_loss(model, theta, data);

  // Pick a starting step the objective tolerates, then decay it as
  // a0/sqrt(t), keeping the best loss ever visited.
  double a0 = 1.0;
  {
    const std::vector<double> g = full_gradient(model, theta, data);
    for (int tries = 0; tries < 60; ++tries) {
      std::vector<double> probe = theta;
      for (size_t u = 0; u < probe.size(); ++u) probe[u] -= a0 * g[u];
      if (full_loss(model, probe, data) < best) break;
      a0 *= 0.5;
    }
  }

  for (int t = 1; t <= iters; ++t) {
    const std::vector<double> g = full_gradient(model, theta, data);
    const double step = a0 / std::sqrt(static_cast<double>(t));
    for (size_t u = 0; u < theta.size(); ++u) theta[u] -= step * g[u];
    best = std::min(best, full_loss(model, theta, data));
  }
  return best;
}

}  // namespace

double estimate_f_star(const PerSampleModel& model, const Dataset& data, FStarMethod method,
                       int gd_iters) {
  if (gd_iters < 1) throw ConfigError("estimate_f_star: gd_iters must be >= 1");
  if (method == FStarMethod::kClosedForm) {
    if (model.name() != "linreg") {
      throw ConfigError("closed_form f* is only defined for linear regression");
    }
    if (const auto theta = solve_normal_equations(data)) {
      return full_loss(model, *theta, data);
    }
    std::cerr << "warning: normal equations are singular; falling back to gradient descent"
              << std::endl;
  }
  return long_run_gd_loss(model, data, gd_iters);
}

std::vector<double> regret_proxy(const std::vector<double>& losses, double f_star) {
  std::vector<double> out(losses.size());
  if (!std::isfinite(f_star)) {
    // No reference optimum: mark the column as absent rather than zero.
    std::fill(out.begin(), out.end(), std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  double acc = 0.0;
  for (size_t i = 0; i < losses.size(); ++i) {
    acc += std::max(0.0, losses[i] - f_star);
    out[i] = acc;
  }
  return out;
}

std::string resolve_output_dir(const std::string& configured) {
  namespace fs = std::filesystem;
  fs::path dir(configured);
  if (dir.is_absolute()) return dir.string();
  if (const char* root = std::getenv(kOutputRootEnvVar)) {
    if (*root != '\0') return (fs::path(root) / dir).string();
  }
  return dir.string();
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (const double x : xs) acc += x;
  return xs.empty() ? std::numeric_limits<double>::quiet_NaN() : acc / xs.size();
}

double sample_std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (const double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / (xs.size() - 1));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  Dataset full = load_dataset(cfg.dataset);

  Dataset train;
  Dataset test;
  const bool explicit_idx_test =
      cfg.dataset.kind == "idx" && !cfg.dataset.test_images.empty() &&
      !cfg.dataset.test_labels.empty();
  if (explicit_idx_test) {
    train = std::move(full);
    test = load_idx_pair(cfg.dataset.test_images, cfg.dataset.test_labels, cfg.dataset.limit);
  } else if (cfg.dataset.test_fraction > 0.0) {
    std::tie(train, test) = train_test_split(full, cfg.dataset.split_seed,
                                             cfg.dataset.test_fraction);
  } else {
    train = std::move(full);
  }

  const std::unique_ptr<PerSampleModel> model = build_model(cfg.model, train);
  for (const OptimizerConfig& opt : cfg.optimizers) {
    validate_optimizer_config(opt, train.n);
  }

  ExperimentResult result;
  if (cfg.fstar_method == "none") {
    result.f_star = std::numeric_limits<double>::quiet_NaN();
  } else {
    FStarMethod method = FStarMethod::kLongRunGd;
    if (cfg.fstar_method == "closed_form" ||
        (cfg.fstar_method == "auto" && cfg.model.kind == "linreg")) {
      method = FStarMethod::kClosedForm;
    }
    result.f_star = estimate_f_star(*model, train, method, cfg.fstar_gd_iters);
  }

  namespace fs = std::filesystem;
  const fs::path out_dir(resolve_output_dir(cfg.output_dir));
  fs::create_directories(out_dir);
  result.resolved_output_dir = out_dir.string();

  for (const OptimizerConfig& opt : cfg.optimizers) {
    const int ipe = iterations_per_epoch(train.n, opt.bandit.k);
    const int t_total = cfg.t_total ? *cfg.t_total : *cfg.epochs * ipe;
    const int eval_every = cfg.eval_every > 0 ? cfg.eval_every : ipe;

    for (const uint64_t seed : cfg.seeds) {
      Trajectory traj = run_optimizer(*model, train, test, opt, seed, t_total, eval_every);
      if (traj.degenerate_l_warning) {
        std::cerr << "warning: " << traj.optimizer << " seed " << seed
                  << ": all observed gradients were zero when the running bound "
                     "was first needed; substituted a tiny positive bound"
                  << std::endl;
      }

      const fs::path run_path =
          out_dir / (cfg.name + "__" + traj.optimizer + "__seed" + std::to_string(seed) +
                     ".csv");
      std::ofstream out(run_path);
      if (!out) throw ParseError("cannot write " + run_path.string());
      out << "optimizer,seed,epoch,iter,train_loss,test_loss,regret,wall_ms,diverged\n";
      std::vector<double> losses;
      for (const EvalRecord& rec : traj.evals) losses.push_back(rec.train_loss);
      const std::vector<double> regret = regret_proxy(losses, result.f_star);
      for (size_t i = 0; i < traj.evals.size(); ++i) {
        const EvalRecord& rec = traj.evals[i];
        const bool divergence_row = traj.diverged && rec.t == traj.diverged_at;
        out << traj.optimizer << "," << seed << "," << rec.epoch << "," << rec.t << ","
            << fmt17(rec.train_loss) << "," << fmt17(rec.test_loss) << ","
            << fmt17(regret[i]) << "," << fmt17(rec.wall_ms) << ","
            << (divergence_row ? 1 : 0) << "\n";
      }
      if (!out.good()) throw ParseError("write to " + run_path.string() + " failed");
      result.run_files.push_back(run_path.string());
      result.trajectories.push_back(std::move(traj));
    }
  }

  // Aggregate across seeds: per (optimizer, eval point), over runs that
  // did not diverge.
  const fs::path agg_path = out_dir / (cfg.name + "__aggregate.csv");
  std::ofstream agg(agg_path);
  if (!agg) throw ParseError("cannot write " + agg_path.string());
  agg << "optimizer,epoch,iter,train_loss_mean,train_loss_std,test_loss_mean,"
         "test_loss_std,runs\n";
  for (const OptimizerConfig& opt : cfg.optimizers) {
    const std::string opt_name =
        opt.display_name.empty() ? variant_name(opt.variant) : opt.display_name;

    std::vector<const Trajectory*> runs;
    int diverged_runs = 0;
    for (const Trajectory& traj : result.trajectories) {
      if (traj.optimizer != opt_name) continue;
      if (traj.diverged) {
        ++diverged_runs;
      } else {
        runs.push_back(&traj);
      }
    }

    VariantSummary summary;
    summary.optimizer = opt_name;
    summary.diverged_runs = diverged_runs;
    summary.runs = static_cast<int>(runs.size()) + diverged_runs;

    if (!runs.empty()) {
      const size_t eval_count = runs.front()->evals.size();
      for (size_t i = 0; i < eval_count; ++i) {
        std::vector<double> train_losses;
        std::vector<double> test_losses;
        for (const Trajectory* traj : runs) {
          train_losses.push_back(traj->evals[i].train_loss);
          test_losses.push_back(traj->evals[i].test_loss);
        }
        agg << opt_name << "," << runs.front()->evals[i].epoch << ","
            << runs.front()->evals[i].t << "," << fmt17(mean_of(train_losses)) << ","
            << fmt17(sample_std_of(train_losses)) << "," << fmt17(mean_of(test_losses))
            << "," << fmt17(sample_std_of(test_losses)) << "," << runs.size() << "\n";
        if (i + 1 == eval_count) {
          summary.final_train_loss_mean = mean_of(train_losses);
          summary.final_train_loss_std = sample_std_of(train_losses);
          summary.final_test_loss_mean = mean_of(test_losses);
          summary.final_test_loss_std = sample_std_of(test_losses);
        }
      }
    } else {
      summary.final_train_loss_mean = std::numeric_limits<double>::quiet_NaN();
      summary.final_train_loss_std = std::numeric_limits<double>::quiet_NaN();
      summary.final_test_loss_mean = std::numeric_limits<double>::quiet_NaN();
      summary.final_test_loss_std = std::numeric_limits<double>::quiet_NaN();
    }
    result.summaries.push_back(std::move(summary));
  }
  if (!agg.good()) throw ParseError("write to " + agg_path.string() + " failed");
  result.aggregate_file = agg_path.string();
  return result;
}

}  // namespace adamcb
