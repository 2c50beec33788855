#include "adamcb/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "adamcb/data.hpp"
#include "adamcb/errors.hpp"
#include "adamcb/harness.hpp"
#include "adamcb/selfcheck.hpp"

namespace adamcb {

namespace {

void print_usage(std::FILE* out) {
  std::fputs(
      "usage: adamcb <command> [options]\n"
      "\n"
      "commands:\n"
      "  run <config>          run the experiment described by a config file\n"
      "  gen-data [options]    write a synthetic classification CSV\n"
      "                        --out PATH (required), --seed N, --n N, --d N,\n"
      "                        --classes N, --heterogeneity X\n"
      "  selftest [--tmp DIR]  run the built-in correctness checks\n"
      "  help                  show this message\n",
      out);
}

uint64_t parse_u64_arg(const std::string& flag, const std::string& text) {
  uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(flag + ": expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

int parse_int_arg(const std::string& flag, const std::string& text) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(flag + ": expected an integer, got '" + text + "'");
  }
  return value;
}

double parse_double_arg(const std::string& flag, const std::string& text) {
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || text.empty() || !std::isfinite(value)) {
    throw ConfigError(flag + ": expected a finite number, got '" + text + "'");
  }
  return value;
}

int cmd_run(const std::vector<std::string>& args) {
  if (args.size() != 1) throw ConfigError("run: expected exactly one config path");
  const ExperimentConfig cfg = parse_config(args[0]);
  const ExperimentResult result = run_experiment(cfg);

  std::printf("experiment '%s': %zu run file(s) in %s\n", cfg.name.c_str(),
              result.run_files.size(), result.resolved_output_dir.c_str());
  if (std::isfinite(result.f_star)) {
    std::printf("reference optimum (train loss): %.6g\n", result.f_star);
  }
  for (const VariantSummary& s : result.summaries) {
    std::printf("  %-12s final train %.6g +/- %.6g", s.optimizer.c_str(),
                s.final_train_loss_mean, s.final_train_loss_std);
    if (!std::isnan(s.final_test_loss_mean)) {
      std::printf("   test %.6g +/- %.6g", s.final_test_loss_mean, s.final_test_loss_std);
    }
    if (s.diverged_runs > 0) {
      std::printf("   [%d/%d runs diverged]", s.diverged_runs, s.runs);
    }
    std::printf("\n");
  }
  std::printf("aggregate: %s\n", result.aggregate_file.c_str());
  return 0;
}

int cmd_gen_data(const std::vector<std::string>& args) {
  std::string out_path;
  uint64_t seed = 1;
  int n = 1000;
  int d = 20;
  int classes = 2;
  double heterogeneity = 0.0;

  for (size_t i = 0; i < args.size(); ++i) {
    const std::string& flag = args[i];
    const auto value = [&]() -> const std::string& {
      if (i + 1 >= args.size()) throw ConfigError("gen-data: " + flag + " needs a value");
      return args[++i];
    };
    if (flag == "--out") {
      out_path = value();
    } else if (flag == "--seed") {
      seed = parse_u64_arg(flag, value());
    } else if (flag == "--n") {
      n = parse_int_arg(flag, value());
    } else if (flag == "--d") {
      d = parse_int_arg(flag, value());
    } else if (flag == "--classes") {
      classes = parse_int_arg(flag, value());
    } else if (flag == "--heterogeneity") {
      heterogeneity = parse_double_arg(flag, value());
    } else {
      throw ConfigError("gen-data: unknown option '" + flag + "'");
    }
  }
  if (out_path.empty()) throw ConfigError("gen-data: --out is required");

  const Dataset data = gen_synthetic_classification(seed, n, d, classes, heterogeneity);
  save_csv(data, out_path);
  std::printf("wrote %s (n=%d, d=%d, classes=%d, heterogeneity=%g, seed=%llu)\n",
              out_path.c_str(), data.n, data.d, classes, heterogeneity,
              static_cast<unsigned long long>(seed));
  return 0;
}

int cmd_selftest(const std::vector<std::string>& args) {
  std::string tmp_dir =
      (std::filesystem::temp_directory_path() / "adamcb-selftest").string();
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--tmp") {
      if (i + 1 >= args.size()) throw ConfigError("selftest: --tmp needs a value");
      tmp_dir = args[++i];
    } else {
      throw ConfigError("selftest: unknown option '" + args[i] + "'");
    }
  }

  const std::vector<CheckResult> results = run_selftest(tmp_dir);
  int failures = 0;
  for (const CheckResult& r : results) {
    std::printf("%s %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) ++failures;
  }
  if (failures > 0) {
    std::printf("%d of %zu checks failed\n", failures, results.size());
    return 2;
  }
  std::printf("all %zu checks passed\n", results.size());
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  try {
    if (args.empty()) {
      print_usage(stderr);
      return 1;
    }
    const std::string& cmd = args[0];
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
      print_usage(stdout);
      return 0;
    }
    if (cmd == "run") return cmd_run(rest);
    if (cmd == "gen-data") return cmd_gen_data(rest);
    if (cmd == "selftest") return cmd_selftest(rest);
    std::fprintf(stderr, "adamcb: unknown command '%s'\n", cmd.c_str());
    print_usage(stderr);
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "adamcb: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "adamcb: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "adamcb: %s\n", e.what());
    return 2;
  }
}

}  // namespace adamcb
