#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "adamcb/data.hpp"
#include "adamcb/errors.hpp"

using namespace adamcb;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  const fs::path dir = fs::temp_directory_path() / "adamcb-data-test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

void push_be_u32(std::vector<unsigned char>& bytes, uint32_t v) {
  bytes.push_back(static_cast<unsigned char>(v >> 24));
  bytes.push_back(static_cast<unsigned char>(v >> 16));
  bytes.push_back(static_cast<unsigned char>(v >> 8));
  bytes.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> image_bytes(uint32_t magic, uint32_t count) {
  std::vector<unsigned char> b;
  push_be_u32(b, magic);
  push_be_u32(b, count);
  push_be_u32(b, 1);
  push_be_u32(b, 2);
  for (uint32_t i = 0; i < count * 2; ++i) b.push_back(static_cast<unsigned char>(i * 50));
  return b;
}

std::vector<unsigned char> label_bytes(uint32_t count) {
  std::vector<unsigned char> b;
  push_be_u32(b, 0x00000801);
  push_be_u32(b, count);
  for (uint32_t i = 0; i < count; ++i) b.push_back(static_cast<unsigned char>(i % 3));
  return b;
}

}  // namespace

TEST_CASE("idx pairs decode with pixels scaled by 255") {
  const fs::path dir = tmp_dir();
  write_file(dir / "img.idx", image_bytes(0x00000803, 3));
  write_file(dir / "lab.idx", label_bytes(3));

  const Dataset data = load_idx_pair((dir / "img.idx").string(), (dir / "lab.idx").string());
  CHECK(data.n == 3);
  CHECK(data.d == 2);
  CHECK(data.kind == TaskKind::kClassification);
  CHECK(data.features[0] == 0.0);
  CHECK(data.features[1] == 50.0 / 255.0);
  CHECK(data.features[5] == 250.0 / 255.0);
  CHECK(data.labels == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(data.classes() == 3);

  const Dataset limited =
      load_idx_pair((dir / "img.idx").string(), (dir / "lab.idx").string(), 2);
  CHECK(limited.n == 2);
  CHECK(limited.labels == std::vector<double>{0.0, 1.0});
}

TEST_CASE("idx corruption raises dedicated error types") {
  const fs::path dir = tmp_dir();
  write_file(dir / "good-img.idx", image_bytes(0x00000803, 2));
  write_file(dir / "good-lab.idx", label_bytes(2));

  write_file(dir / "wrong-magic.idx", image_bytes(0x00000804, 2));
  CHECK_THROWS_AS(
      load_idx_pair((dir / "wrong-magic.idx").string(), (dir / "good-lab.idx").string()),
      IdxBadMagicError);

  std::vector<unsigned char> short_pixels = image_bytes(0x00000803, 2);
  short_pixels.resize(short_pixels.size() - 1);
  write_file(dir / "short.idx", short_pixels);
  CHECK_THROWS_AS(load_idx_pair((dir / "short.idx").string(), (dir / "good-lab.idx").string()),
                  IdxTruncatedError);

  std::vector<unsigned char> short_header = image_bytes(0x00000803, 2);
  short_header.resize(10);  // cut inside the dimension fields
  write_file(dir / "short-header.idx", short_header);
  CHECK_THROWS_AS(
      load_idx_pair((dir / "short-header.idx").string(), (dir / "good-lab.idx").string()),
      IdxTruncatedError);

  write_file(dir / "three-labels.idx", label_bytes(3));
  CHECK_THROWS_AS(
      load_idx_pair((dir / "good-img.idx").string(), (dir / "three-labels.idx").string()),
      IdxCountMismatchError);

  CHECK_THROWS_AS(load_idx_pair((dir / "nonexistent.idx").string(),
                                (dir / "good-lab.idx").string()),
                  ParseError);
}

TEST_CASE("csv round-trips synthetic data bit for bit") {
  const fs::path dir = tmp_dir();
  const Dataset original = gen_synthetic_classification(9, 40, 4, 3, 0.15);
  const fs::path path = dir / "roundtrip.csv";
  save_csv(original, path.string());

  const Dataset loaded = load_csv(path.string(), "label", TaskKind::kClassification);
  CHECK(loaded.n == original.n);
  CHECK(loaded.d == original.d);
  CHECK(loaded.features == original.features);
  CHECK(loaded.labels == original.labels);
}

TEST_CASE("csv loader validates structure and values") {
  const fs::path dir = tmp_dir();

  write_text(dir / "ok.csv", "a,b,label\n1.5,2,0\n-0.5,3,1\n");
  const Dataset ok = load_csv((dir / "ok.csv").string(), "label", TaskKind::kClassification);
  CHECK(ok.n == 2);
  CHECK(ok.d == 2);
  CHECK(ok.features == std::vector<double>{1.5, 2.0, -0.5, 3.0});
  CHECK(ok.labels == std::vector<double>{0.0, 1.0});

  // The label column can sit anywhere; features keep file order.
  write_text(dir / "mid.csv", "a,label,b\n1,4,2\n");
  const Dataset mid = load_csv((dir / "mid.csv").string(), "label", TaskKind::kRegression);
  CHECK(mid.features == std::vector<double>{1.0, 2.0});
  CHECK(mid.labels == std::vector<double>{4.0});

  write_text(dir / "missing.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(load_csv((dir / "missing.csv").string(), "label", TaskKind::kRegression),
                  CsvError);

  write_text(dir / "ragged.csv", "a,b,label\n1,2,0\n1,2\n");
  try {
    load_csv((dir / "ragged.csv").string(), "label", TaskKind::kClassification);
    FAIL("ragged row accepted");
  } catch (const CsvError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  write_text(dir / "nonnum.csv", "a,b,label\n1,x,0\n");
  CHECK_THROWS_AS(load_csv((dir / "nonnum.csv").string(), "label", TaskKind::kClassification),
                  CsvError);

  // Classification labels must be non-negative integers; regression allows
  // the same file.
  write_text(dir / "frac.csv", "a,label\n1,0.5\n");
  CHECK_THROWS_AS(load_csv((dir / "frac.csv").string(), "label", TaskKind::kClassification),
                  CsvError);
  CHECK_NOTHROW(load_csv((dir / "frac.csv").string(), "label", TaskKind::kRegression));

  write_text(dir / "empty.csv", "");
  CHECK_THROWS_AS(load_csv((dir / "empty.csv").string(), "label", TaskKind::kClassification),
                  CsvError);
}

TEST_CASE("synthetic data is seed-determined with cycling labels") {
  const Dataset a = gen_synthetic_classification(21, 60, 5, 3, 0.1);
  const Dataset b = gen_synthetic_classification(21, 60, 5, 3, 0.1);
  const Dataset c = gen_synthetic_classification(22, 60, 5, 3, 0.1);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.features != c.features);

  CHECK(a.n == 60);
  CHECK(a.d == 5);
  CHECK(a.classes() == 3);
  for (int i = 0; i < a.n; ++i) CHECK(a.labels[i] == i % 3);
}

TEST_CASE("class means are separated enough to matter") {
  // With zero heterogeneity and unit clusters 3 apart, the per-class
  // feature means should straddle distinct centers.
  const Dataset data = gen_synthetic_classification(5, 600, 4, 2, 0.0);
  double mean0 = 0.0;
  double mean1 = 0.0;
  int n0 = 0;
  int n1 = 0;
  for (int i = 0; i < data.n; ++i) {
    if (data.labels[i] == 0.0) {
      mean0 += data.row(i)[0];
      ++n0;
    } else {
      mean1 += data.row(i)[0];
      ++n1;
    }
  }
  mean0 /= n0;
  mean1 /= n1;
  CHECK(std::abs(mean0 - mean1) > 1.0);
}

TEST_CASE("train/test splits partition the rows") {
  const Dataset data = gen_synthetic_classification(31, 50, 3, 2, 0.0);
  const auto [train, test] = train_test_split(data, 8, 0.2);
  CHECK(train.n == 40);  // ceil(50 * 0.8)
  CHECK(test.n == 10);
  CHECK(train.d == 3);
  CHECK(test.d == 3);

  // Every original row appears exactly once across the two sides.
  std::multiset<double> original;
  std::multiset<double> recombined;
  for (const double f : data.features) original.insert(f);
  for (const double f : train.features) recombined.insert(f);
  for (const double f : test.features) recombined.insert(f);
  CHECK(original == recombined);

  // Same seed, same split; different seed, different order.
  const auto [train2, test2] = train_test_split(data, 8, 0.2);
  CHECK(train.features == train2.features);
  const auto [train3, test3] = train_test_split(data, 9, 0.2);
  CHECK(train.features != train3.features);

  CHECK_THROWS_AS(train_test_split(data, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(train_test_split(data, 1, 1.0), ConfigError);
}

TEST_CASE("classes() is for classification only") {
  Dataset data;
  data.n = 2;
  data.d = 1;
  data.features = {0.0, 1.0};
  data.labels = {0.0, 4.0};
  data.kind = TaskKind::kClassification;
  CHECK(data.classes() == 5);
  data.kind = TaskKind::kRegression;
  CHECK_THROWS_AS(data.classes(), ContractError);
}
