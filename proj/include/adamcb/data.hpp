#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adamcb {

enum class TaskKind { kClassification, kRegression };

// In-memory dataset: row-major feature matrix plus one label per row.
// Classification labels are stored as doubles but hold non-negative
// integers; classes() reports 1 + the largest one.
struct Dataset {
  std::vector<double> features;  // n x d, row-major
  std::vector<double> labels;
  int n = 0;
  int d = 0;
  TaskKind kind = TaskKind::kClassification;
  std::string name;

  std::span<const double> row(int i) const {
    return std::span<const double>(features.data() + static_cast<size_t>(i) * d, d);
  }
  int classes() const;
};

// Loads an IDX image file (magic 0x00000803, big-endian dims) paired with
// an IDX label file (magic 0x00000801). Pixel bytes are scaled to [0, 1]
// by dividing by 255; each image is flattened to one row. `limit` keeps
// only the first `limit` examples. Throws IdxBadMagicError,
// IdxTruncatedError or IdxCountMismatchError naming the offending field
// and byte offset.
Dataset load_idx_pair(const std::string& image_path, const std::string& label_path,
                      std::optional<int> limit = {});

// Loads a headered, comma-separated numeric table. `label_column` names
// the label; every other column becomes a feature in file order.
// Classification labels must be non-negative integers. Malformed content
// throws CsvError naming the 1-based line.
Dataset load_csv(const std::string& path, const std::string& label_column, TaskKind kind);

// Writes a dataset back out in the same format load_csv reads (features
// f0..f{d-1}, then `label`), with enough digits that a reload is
// bit-identical.
void save_csv(const Dataset& data, const std::string& path);

// Gaussian class clusters with controllable heterogeneity: class means sit
// pairwise 3.0 apart, labels cycle 0..classes-1, and the first
// round(heterogeneity * n) samples are drawn at 4x the unit cluster radius
// (the "hard" outliers). Fully determined by the seed.
Dataset gen_synthetic_classification(uint64_t seed, int n, int d, int classes,
                                     double heterogeneity);

// Seeded shuffle then split: the train side keeps ceil(n * (1 - test_fraction))
// rows. Requires 0 < test_fraction < 1.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, uint64_t seed,
                                             double test_fraction);

}  // namespace adamcb
