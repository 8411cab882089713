#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "protoloss/tape.hpp"
#include "protoloss/tensor.hpp"

namespace protoloss {

using Label = std::size_t;

// One matrix that is both the classifier weight matrix and the set of class
// centers. Row j is the prototype of class j; `alpha` is the hypersphere
// radius the rows are reset to at each epoch start and the softmax
// temperature divisor.
class PrototypeBank {
 public:
  PrototypeBank() = default;
  PrototypeBank(Tensor centers, double alpha);

  std::size_t num_classes() const { return centers_.rows(); }
  std::size_t dim() const { return centers_.cols(); }
  double alpha() const { return alpha_; }

  const Tensor& centers() const { return centers_; }
  Tensor& centers() { return centers_; }
  std::span<const double> row(std::size_t j) const { return centers_.row(j); }

  friend bool operator==(const PrototypeBank&, const PrototypeBank&) = default;

 private:
  Tensor centers_;
  double alpha_ = 1.0;
};

// Rows drawn i.i.d. standard normal, then rescaled to norm alpha.
PrototypeBank init_prototypes(std::size_t num_classes, std::size_t dim,
                              double alpha, std::uint64_t seed);

// c_j <- alpha * c_j / |c_j|. Throws DegeneratePrototypeError when a row norm
// is below 1e-12.
void renormalize(PrototypeBank& bank);

// Largest |(|c_j| - alpha)| / alpha over the rows.
double max_norm_deviation(const PrototypeBank& bank);

// The bank's matrix as a single differentiable leaf. Every loss term reads
// this one Var, so classifier and centers share storage on the tape.
struct BoundPrototypes {
  Var matrix;
  double alpha = 1.0;
};

BoundPrototypes bind(Tape& tape, const PrototypeBank& bank,
                     bool requires_grad = true);

// (h C^T) / alpha, shape [B, M].
Var logits(const BoundPrototypes& prototypes, Var h_batch);

// argmin_{j != label} |h - c_j|, smallest index on ties. nullopt when there
// is only one class.
std::optional<std::size_t> nearest_negative_for_sample(
    const Tensor& centers, std::span<const double> h, Label label);

// argmin_{k != j} |c_j - c_k|, smallest index on ties. nullopt when M == 1.
std::optional<std::size_t> nearest_negative_for_class(const Tensor& centers,
                                                      std::size_t j);

// Row-wise versions used once per mini-batch. Empty when M == 1.
std::vector<std::size_t> nearest_negatives_for_samples(
    const Tensor& centers, const Tensor& h_batch, std::span<const Label> labels);
std::vector<std::size_t> nearest_negatives_for_classes(const Tensor& centers);

// CSV with header "class,c0,...,c{d-1}" and one row per class.
void save_prototypes_csv(const Tensor& centers,
                         const std::filesystem::path& path);
Tensor load_prototypes_csv(const std::filesystem::path& path);

}  // namespace protoloss
