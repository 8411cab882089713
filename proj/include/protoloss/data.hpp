#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "protoloss/prototypes.hpp"
#include "protoloss/tensor.hpp"

namespace protoloss {

enum class Split { kTrain, kTest };

struct Dataset {
  Tensor features;  // [N, D]
  std::vector<Label> labels;
  std::size_t num_classes = 0;
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return features.cols(); }

  // Throws ContractViolation when labels/shape/finiteness invariants fail.
  void validate() const;
};

struct BlobConfig {
  std::size_t classes = 10;
  std::size_t input_dim = 16;
  std::size_t n_per_class = 500;
  double center_scale = 5.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Class centers uniform on the radius-center_scale sphere in R^D, samples
// center + N(0, sigma^2 I). Each class contributes n - n/5 samples to train
// and n/5 to test.
TrainTestSplit gaussian_blobs(const BlobConfig& config);

// Per-column affine map onto [0, 1], fitted on one dataset and applied to
// others. Constant columns map to 0.
class UnitRangeScaler {
 public:
  static UnitRangeScaler fit(const Tensor& features);
  void apply(Tensor& features) const;

 private:
  std::vector<double> low_;
  std::vector<double> span_;
};

// Rows "label,feat0,...,feat{D-1}"; an optional first line starting with
// "label" is treated as a header. With `rescale`, columns are mapped to
// [0, 1] using this file's own ranges.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes,
                 bool rescale = false, Split split = Split::kTrain);
void save_csv(const Dataset& data, const std::filesystem::path& path);

// One shuffled pass over [0, n): Fisher-Yates, then consecutive chunks of
// batch_size. The last chunk may be short.
std::vector<std::vector<std::size_t>> batches(std::size_t n,
                                              std::size_t batch_size,
                                              std::mt19937_64& rng);

struct Batch {
  Tensor features;
  std::vector<Label> labels;
};

Batch gather_batch(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace protoloss
