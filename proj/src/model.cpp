#include "protoloss/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "protoloss/error.hpp"

namespace protoloss {
namespace {

constexpr char kMagic[16] = {'P', 'R', 'O', 'T', 'O', 'L', 'O', 'S',
                             'S', '-', 'T', 'H', 'E', 'T', 'A', '\0'};

static_assert(std::endian::native == std::endian::little,
              "parameter files are written in native little-endian order");

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return static_cast<bool>(in);
}

}  // namespace

void MlpConfig::validate() const {
  if (layer_dims.size() < 2) {
    throw ConfigError("model.layer_dims needs at least input and latent dims");
  }
  for (std::size_t dim : layer_dims) {
    if (dim < 1) throw ConfigError("model.layer_dims entries must be >= 1");
  }
}

FeatureExtractor::FeatureExtractor(std::vector<Tensor> weights,
                                   std::vector<Tensor> biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  if (weights_.empty() || weights_.size() != biases_.size()) {
    throw ContractViolation("feature extractor needs one bias per layer");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rank() != 2 || biases_[l].rank() != 1 ||
        biases_[l].size() != weights_[l].rows()) {
      throw ContractViolation("layer " + std::to_string(l) +
                              " has inconsistent weight/bias shapes");
    }
    if (l > 0 && weights_[l].cols() != weights_[l - 1].rows()) {
      throw ContractViolation("layer " + std::to_string(l) +
                              " does not chain with the previous layer");
    }
  }
}

std::vector<std::size_t> FeatureExtractor::layer_dims() const {
  std::vector<std::size_t> dims{input_dim()};
  for (const Tensor& w : weights_) dims.push_back(w.rows());
  return dims;
}

bool FeatureExtractor::all_finite() const {
  for (const Tensor& w : weights_) {
    if (!w.all_finite()) return false;
  }
  for (const Tensor& b : biases_) {
    if (!b.all_finite()) return false;
  }
  return true;
}

FeatureExtractor init_mlp(const MlpConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  for (std::size_t l = 0; l + 1 < config.layer_dims.size(); ++l) {
    const std::size_t fan_in = config.layer_dims[l];
    const std::size_t fan_out = config.layer_dims[l + 1];
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    Tensor w(Shape{fan_out, fan_in});
    for (double& v : w.data()) v = normal(rng);
    weights.push_back(std::move(w));
    biases.emplace_back(Shape{fan_out});
  }
  return FeatureExtractor(std::move(weights), std::move(biases));
}

std::vector<Var> MlpBinding::parameters() const {
  std::vector<Var> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

MlpBinding bind(Tape& tape, const FeatureExtractor& model,
                bool requires_grad) {
  MlpBinding binding;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    binding.weights.push_back(tape.leaf(model.weights()[l], requires_grad));
    binding.biases.push_back(tape.leaf(model.biases()[l], requires_grad));
  }
  return binding;
}

Var forward(const MlpBinding& model, Var x_batch) {
  const Tensor& x = x_batch.value();
  const std::size_t in_dim = model.weights.front().value().cols();
  if (x.rank() != 2 || x.cols() != in_dim) {
    throw ContractViolation("forward: input " + shape_to_string(x.shape()) +
                            " does not match input dim " +
                            std::to_string(in_dim));
  }
  Var h = x_batch;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    h = add_row(matmul_nt(h, model.weights[l]), model.biases[l]);
    if (l + 1 < model.weights.size()) h = relu(h);
  }
  return h;
}

Tensor embed(const FeatureExtractor& model, const Tensor& x_batch) {
  Tape tape;
  const MlpBinding binding = bind(tape, model, false);
  return forward(binding, tape.constant(x_batch)).value();
}

void save_parameters(const FeatureExtractor& model,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const auto write_tensor = [&](const Tensor& t) {
    write_pod(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_pod(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    write_tensor(model.weights()[l]);
    write_tensor(model.biases()[l]);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

FeatureExtractor load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path.string() + ": bad parameter file magic");
  }
  std::vector<Tensor> tensors;
  std::uint32_t rank = 0;
  while (read_pod(in, rank)) {
    if (rank > 8) throw ParseError(path.string() + ": implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint32_t dim = 0;
      if (!read_pod(in, dim)) throw ParseError(path.string() + ": truncated");
      d = dim;
    }
    std::vector<double> data(shape_size(shape));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw ParseError(path.string() + ": truncated tensor data");
    tensors.emplace_back(std::move(shape), std::move(data));
  }
  if (tensors.empty() || tensors.size() % 2 != 0) {
    throw ParseError(path.string() + ": expected weight/bias pairs");
  }
  std::vector<Tensor> weights, biases;
  for (std::size_t i = 0; i < tensors.size(); i += 2) {
    weights.push_back(std::move(tensors[i]));
    biases.push_back(std::move(tensors[i + 1]));
  }
  try {
    return FeatureExtractor(std::move(weights), std::move(biases));
  } catch (const ContractViolation& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace protoloss
