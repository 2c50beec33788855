#include "adamcb/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "adamcb/errors.hpp"
#include "adamcb/rng.hpp"

namespace adamcb {

int Dataset::classes() const {
  if (kind != TaskKind::kClassification) {
    throw ContractError("classes() called on a regression dataset");
  }
  double max_label = -1.0;
  for (const double y : labels) max_label = std::max(max_label, y);
  return static_cast<int>(max_label) + 1;
}

namespace {

constexpr uint32_t kIdxImageMagic = 0x00000803;
constexpr uint32_t kIdxLabelMagic = 0x00000801;

std::vector<unsigned char> read_all_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

// Big-endian u32 at `offset`; `field` feeds the error message.
uint32_t read_be_u32(const std::vector<unsigned char>& bytes, size_t offset,
                     const std::string& path, const std::string& field) {
  if (offset + 4 > bytes.size()) {
    throw IdxTruncatedError(path + ": truncated while reading " + field + " at byte offset " +
                            std::to_string(offset));
  }
  return (static_cast<uint32_t>(bytes[offset]) << 24) |
         (static_cast<uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<uint32_t>(bytes[offset + 3]);
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0' && std::isfinite(out);
}

}  // namespace

Dataset load_idx_pair(const std::string& image_path, const std::string& label_path,
                      std::optional<int> limit) {
  const std::vector<unsigned char> images = read_all_bytes(image_path);
  const std::vector<unsigned char> labels = read_all_bytes(label_path);

  const uint32_t image_magic = read_be_u32(images, 0, image_path, "magic");
  if (image_magic != kIdxImageMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", image_magic);
    throw IdxBadMagicError(image_path + ": magic at byte offset 0 is " + buf +
                           ", expected 0x00000803");
  }
  const uint32_t label_magic = read_be_u32(labels, 0, label_path, "magic");
  if (label_magic != kIdxLabelMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "0x%08x", label_magic);
    throw IdxBadMagicError(label_path + ": magic at byte offset 0 is " + buf +
                           ", expected 0x00000801");
  }

  const uint32_t image_count = read_be_u32(images, 4, image_path, "image count");
  const uint32_t rows = read_be_u32(images, 8, image_path, "row count");
  const uint32_t cols = read_be_u32(images, 12, image_path, "column count");
  const uint32_t label_count = read_be_u32(labels, 4, label_path, "label count");
  if (image_count != label_count) {
    throw IdxCountMismatchError(image_path + " holds " + std::to_string(image_count) +
                                " images but " + label_path + " holds " +
                                std::to_string(label_count) + " labels");
  }

  const size_t pixels = static_cast<size_t>(rows) * cols;
  const size_t need_image_bytes = 16 + pixels * image_count;
  if (images.size() < need_image_bytes) {
    throw IdxTruncatedError(image_path + ": pixel data ends at byte offset " +
                            std::to_string(images.size()) + ", expected " +
                            std::to_string(need_image_bytes));
  }
  const size_t need_label_bytes = 8 + static_cast<size_t>(label_count);
  if (labels.size() < need_label_bytes) {
    throw IdxTruncatedError(label_path + ": label data ends at byte offset " +
                            std::to_string(labels.size()) + ", expected " +
                            std::to_string(need_label_bytes));
  }

  int n = static_cast<int>(image_count);
  if (limit) {
    if (*limit < 1) throw ConfigError("load_idx_pair: limit must be >= 1");
    n = std::min(n, *limit);
  }

  Dataset data;
  data.n = n;
  data.d = static_cast<int>(pixels);
  data.kind = TaskKind::kClassification;
  data.name = image_path;
  data.features.resize(static_cast<size_t>(n) * pixels);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const unsigned char* px = images.data() + 16 + static_cast<size_t>(i) * pixels;
    for (size_t u = 0; u < pixels; ++u) {
      data.features[static_cast<size_t>(i) * pixels + u] = px[u] / 255.0;
    }
    data.labels[i] = static_cast<double>(labels[8 + static_cast<size_t>(i)]);
  }
  return data;
}

Dataset load_csv(const std::string& path, const std::string& label_column, TaskKind kind) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw CsvError(path + ": empty file, expected a header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> columns;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) columns.push_back(cell);
  }
  int label_index = -1;
  for (size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == label_column) label_index = static_cast<int>(c);
  }
  if (label_index < 0) {
    std::string have;
    for (const std::string& c : columns) have += (have.empty() ? "" : ", ") + c;
    throw CsvError(path + ": no column named '" + label_column + "' (columns: " + have + ")");
  }

  Dataset data;
  data.kind = kind;
  data.d = static_cast<int>(columns.size()) - 1;
  data.name = path;
  if (data.d < 1) throw CsvError(path + ": need at least one feature column");

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::stringstream row(line);
    std::string cell;
    int col = 0;
    while (std::getline(row, cell, ',')) {
      double value;
      if (!parse_double(cell, value)) {
        throw CsvError(path + " line " + std::to_string(line_no) + ": '" + cell +
                       "' is not a number");
      }
      if (col == label_index) {
        if (kind == TaskKind::kClassification &&
            (value < 0.0 || value != std::floor(value))) {
          throw CsvError(path + " line " + std::to_string(line_no) + ": label " + cell +
                         " is not a non-negative integer");
        }
        data.labels.push_back(value);
      } else {
        data.features.push_back(value);
      }
      ++col;
    }
    if (col != static_cast<int>(columns.size())) {
      throw CsvError(path + " line " + std::to_string(line_no) + ": has " +
                     std::to_string(col) + " cells, header has " +
                     std::to_string(columns.size()));
    }
  }
  data.n = static_cast<int>(data.labels.size());
  if (data.n == 0) throw CsvError(path + ": no data rows");
  return data;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  for (int u = 0; u < data.d; ++u) out << "f" << u << ",";
  out << "label\n";
  char buf[32];
  for (int i = 0; i < data.n; ++i) {
    for (int u = 0; u < data.d; ++u) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features[static_cast<size_t>(i) * data.d + u]);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", data.labels[i]);
    out << buf << "\n";
  }
  if (!out.good()) throw ParseError("write to " + path + " failed");
}

Dataset gen_synthetic_classification(uint64_t seed, int n, int d, int classes,
                                     double heterogeneity) {
  if (n < 1 || d < 1) throw ConfigError("gen_synthetic: need n >= 1 and d >= 1");
  if (classes < 2) throw ConfigError("gen_synthetic: need at least 2 classes");
  if (!(heterogeneity >= 0.0 && heterogeneity <= 1.0)) {
    throw ConfigError("gen_synthetic: heterogeneity must lie in [0, 1]");
  }

  // Class means pairwise 3.0 apart: (3/sqrt(2)) * e_c when each class can
  // own an axis, otherwise spaced 3.0 apart along the first axis.
  std::vector<std::vector<double>> means(classes, std::vector<double>(d, 0.0));
  for (int c = 0; c < classes; ++c) {
    if (classes <= d) {
      means[c][c] = 3.0 / std::sqrt(2.0);
    } else {
      means[c][0] = 3.0 * c;
    }
  }

  Dataset data;
  data.n = n;
  data.d = d;
  data.kind = TaskKind::kClassification;
  data.name = "synthetic";
  data.features.resize(static_cast<size_t>(n) * d);
  data.labels.resize(n);

  SplitRng rng = SplitRng(seed).split("synthetic");
  const int outliers = static_cast<int>(std::llround(heterogeneity * n));
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    const double radius = (i < outliers) ? 4.0 : 1.0;
    data.labels[i] = static_cast<double>(c);
    for (int u = 0; u < d; ++u) {
      data.features[static_cast<size_t>(i) * d + u] = means[c][u] + radius * rng.normal();
    }
  }
  return data;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, uint64_t seed,
                                             double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("train_test_split: test_fraction must lie in (0, 1)");
  }
  if (data.n < 2) throw ConfigError("train_test_split: need at least 2 rows");

  std::vector<int> order(data.n);
  for (int i = 0; i < data.n; ++i) order[i] = i;
  SplitRng rng = SplitRng(seed).split("split");
  for (int i = data.n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }

  const int train_n = static_cast<int>(std::ceil(data.n * (1.0 - test_fraction)));
  auto take = [&](int begin, int count, const std::string& suffix) {
    Dataset part;
    part.n = count;
    part.d = data.d;
    part.kind = data.kind;
    part.name = data.name + suffix;
    part.features.resize(static_cast<size_t>(count) * data.d);
    part.labels.resize(count);
    for (int i = 0; i < count; ++i) {
      const int src = order[begin + i];
      std::copy_n(data.features.data() + static_cast<size_t>(src) * data.d, data.d,
                  part.features.data() + static_cast<size_t>(i) * data.d);
      part.labels[i] = data.labels[src];
    }
    return part;
  };
  return {take(0, train_n, "/train"), take(train_n, data.n - train_n, "/test")};
}

}  // namespace adamcb
