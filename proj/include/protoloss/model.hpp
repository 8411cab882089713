#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "protoloss/tape.hpp"
#include "protoloss/tensor.hpp"

namespace protoloss {

enum class Activation { kRelu };

struct MlpConfig {
  std::vector<std::size_t> layer_dims;  // [input, hidden..., latent]
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t latent_dim() const { return layer_dims.back(); }
};

// Multilayer perceptron h(x; theta). Layer l holds weights [out, in] and a
// bias [out]. No activation after the last layer.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(std::vector<Tensor> weights, std::vector<Tensor> biases);

  std::size_t num_layers() const { return weights_.size(); }
  std::size_t input_dim() const { return weights_.front().cols(); }
  std::size_t latent_dim() const { return weights_.back().rows(); }
  std::vector<std::size_t> layer_dims() const;

  const std::vector<Tensor>& weights() const { return weights_; }
  const std::vector<Tensor>& biases() const { return biases_; }
  std::vector<Tensor>& weights() { return weights_; }
  std::vector<Tensor>& biases() { return biases_; }

  bool all_finite() const;

  friend bool operator==(const FeatureExtractor&,
                         const FeatureExtractor&) = default;

 private:
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// He initialization: weights ~ N(0, 2 / fan_in), zero biases.
FeatureExtractor init_mlp(const MlpConfig& config);

// Parameters recorded as differentiable leaves on a tape.
struct MlpBinding {
  std::vector<Var> weights;
  std::vector<Var> biases;

  // Weights and biases interleaved in layer order (W0, b0, W1, b1, ...).
  std::vector<Var> parameters() const;
};

MlpBinding bind(Tape& tape, const FeatureExtractor& model,
                bool requires_grad = true);

// Records h = L_k(relu(...relu(L_1(x)))) on the binding's tape.
Var forward(const MlpBinding& model, Var x_batch);

// Tape-free evaluation for metrics and export.
Tensor embed(const FeatureExtractor& model, const Tensor& x_batch);

// Binary parameter file: magic "PROTOLOSS-THETA\0" followed by, per tensor
// in (W0, b0, W1, b1, ...) order, rank:u32, dims:u32 x rank, f64 data, all
// little-endian.
void save_parameters(const FeatureExtractor& model,
                     const std::filesystem::path& path);
FeatureExtractor load_parameters(const std::filesystem::path& path);

}  // namespace protoloss
