#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "protoloss/data.hpp"
#include "protoloss/error.hpp"

namespace protoloss {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("protoloss_data_" + std::to_string(counter_++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string what_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

TEST(Blobs, SplitSizesAndLabels) {
  const TrainTestSplit d = gaussian_blobs({3, 4, 10, 5.0, 1.0, 1});
  EXPECT_EQ(d.train.size(), 24u);
  EXPECT_EQ(d.test.size(), 6u);
  EXPECT_EQ(d.train.input_dim(), 4u);
  EXPECT_EQ(d.train.split, Split::kTrain);
  EXPECT_EQ(d.test.split, Split::kTest);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(std::count(d.train.labels.begin(), d.train.labels.end(), j), 8);
    EXPECT_EQ(std::count(d.test.labels.begin(), d.test.labels.end(), j), 2);
  }
  EXPECT_NO_THROW(d.train.validate());
}

TEST(Blobs, Deterministic) {
  const BlobConfig c{4, 5, 20, 5.0, 1.0, 9};
  const TrainTestSplit a = gaussian_blobs(c), b = gaussian_blobs(c);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.test.labels, b.test.labels);
}

TEST(Blobs, ZeroNoiseSitsOnCentersOnSphere) {
  const TrainTestSplit d = gaussian_blobs({3, 6, 10, 5.0, 0.0, 2});
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    EXPECT_NEAR(euclidean_norm(d.train.features.row(i)), 5.0, 1e-12);
    for (std::size_t k = 0; k < d.train.size(); ++k) {
      if (d.train.labels[i] == d.train.labels[k]) {
        EXPECT_EQ(squared_distance(d.train.features.row(i), d.train.features.row(k)), 0.0);
      }
    }
  }
}

TEST(Blobs, ClassMeansApproachCenters) {
  // Means of the noisy draw against the noise-free draw (the centers) for the
  // same seed: within 3 sigma / sqrt(n) per coordinate.
  const BlobConfig noisy{5, 8, 400, 5.0, 1.0, 3};
  BlobConfig clean = noisy;
  clean.noise_sigma = 0.0;
  const TrainTestSplit a = gaussian_blobs(noisy), b = gaussian_blobs(clean);
  for (std::size_t j = 0; j < 5; ++j) {
    std::vector<double> mean(8, 0.0), center(8, 0.0);
    double n = 0;
    for (std::size_t i = 0; i < a.train.size(); ++i) {
      if (a.train.labels[i] != j) continue;
      for (std::size_t t = 0; t < 8; ++t) mean[t] += a.train.features.at(i, t);
      n += 1;
    }
    for (std::size_t i = 0; i < b.train.size(); ++i) {
      if (b.train.labels[i] != j) continue;
      for (std::size_t t = 0; t < 8; ++t) center[t] = b.train.features.at(i, t);
      break;
    }
    for (std::size_t t = 0; t < 8; ++t) {
      EXPECT_NEAR(mean[t] / n, center[t], 3.0 / std::sqrt(n));
    }
  }
}

TEST(Blobs, InvalidConfig) {
  EXPECT_THROW(gaussian_blobs({0, 4, 10, 5.0, 1.0, 1}), ConfigError);
  EXPECT_THROW(gaussian_blobs({3, 4, 10, 5.0, -1.0, 1}), ConfigError);
}

TEST(Csv, LoadsValidFile) {
  TempDir dir;
  const auto p = dir.file("ok.csv", "0,1.5,2\n1,-3,4e-1\n");
  const Dataset d = load_csv(p, 2);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.features, Tensor::matrix(2, 2, {1.5, 2, -3, 0.4}));
  EXPECT_EQ(d.labels, (std::vector<Label>{0, 1}));
  const Dataset with_header = load_csv(dir.file("h.csv", "label,x0,x1\n0,1.5,2\n"), 2);
  EXPECT_EQ(with_header.size(), 1u);
}

TEST(Csv, ErrorsNameTheLine) {
  TempDir dir;
  const auto bad_label = dir.file("l.csv", "label,x0\n0,1\n2,1\n");
  EXPECT_NE(what_of([&] { load_csv(bad_label, 2); }).find(":3:"), std::string::npos);
  const auto ragged = dir.file("r.csv", "0,1,2\n1,3\n");
  EXPECT_NE(what_of([&] { load_csv(ragged, 2); }).find(":2:"), std::string::npos);
  const auto text = dir.file("t.csv", "0,1,2\n1,3,abc\n");
  EXPECT_NE(what_of([&] { load_csv(text, 2); }).find(":2:"), std::string::npos);
  EXPECT_THROW(load_csv(dir.path() / "missing.csv", 2), IoError);
}

TEST(Csv, RoundTrip) {
  TempDir dir;
  const TrainTestSplit d = gaussian_blobs({3, 4, 10, 5.0, 1.0, 4});
  save_csv(d.train, dir.path() / "train.csv");
  const Dataset back = load_csv(dir.path() / "train.csv", 3);
  EXPECT_EQ(back.labels, d.train.labels);
  for (std::size_t i = 0; i < back.features.size(); ++i) {
    EXPECT_NEAR(back.features[i], d.train.features[i], 1e-12);
  }
}

TEST(Csv, RescaleMapsColumnsToUnitRange) {
  TempDir dir;
  const auto p = dir.file("s.csv", "0,1,7\n1,3,7\n0,2,7\n");
  const Dataset d = load_csv(p, 2, true);
  EXPECT_EQ(d.features, Tensor::matrix(3, 2, {0, 0, 1, 0, 0.5, 0}));
}

TEST(Batches, SizesAndClamp) {
  std::mt19937_64 rng(1);
  std::vector<std::size_t> sizes;
  for (const auto& b : batches(10, 3, rng)) sizes.push_back(b.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 3, 1}));
  const auto one = batches(10, 64, rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].size(), 10u);
  EXPECT_THROW(batches(10, 0, rng), ConfigError);
}

TEST(Batches, PartitionEveryEpoch) {
  std::mt19937_64 rng(2);
  for (int epoch = 0; epoch < 20; ++epoch) {
    std::vector<std::size_t> all;
    for (const auto& b : batches(97, 8, rng)) all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), 97u);
    for (std::size_t i = 0; i < 97; ++i) EXPECT_EQ(all[i], i);
  }
}

TEST(Batches, DeterministicPerRngState) {
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(batches(50, 7, a), batches(50, 7, b));
  EXPECT_NE(batches(50, 7, a), batches(50, 7, a));
}

TEST(Batches, GatherBatch) {
  const TrainTestSplit d = gaussian_blobs({2, 3, 5, 5.0, 1.0, 5});
  const std::vector<std::size_t> idx = {3, 0};
  const Batch b = gather_batch(d.train, idx);
  EXPECT_EQ(b.labels, (std::vector<Label>{d.train.labels[3], d.train.labels[0]}));
  EXPECT_TRUE(std::equal(b.features.row(0).begin(), b.features.row(0).end(),
                         d.train.features.row(3).begin()));
}

}  // namespace
}  // namespace protoloss
