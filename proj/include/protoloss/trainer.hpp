#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "protoloss/data.hpp"
#include "protoloss/error.hpp"
#include "protoloss/losses.hpp"
#include "protoloss/model.hpp"
#include "protoloss/prototypes.hpp"

namespace protoloss {

enum class Method { kCE, kCL, kDPP, kDPNP };

const char* to_string(Method method);
Method parse_method(const std::string& text);

struct TrainConfig {
  Method method = Method::kDPNP;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double eta = 0.1;    // network learning rate
  double eta_c = 0.1;  // prototype learning rate
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<double> lr_drop_points = {0.25, 0.5, 0.75};
  double lr_drop_factor = 0.1;
  LossWeights loss_weights;
  RepulsionOptions repulsion;
  double alpha = 40.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown loss;  // sample-weighted mean over the epoch's batches
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
  double lr = 0.0;
};

struct TrainState {
  FeatureExtractor model;
  PrototypeBank bank;
  // Separate center matrix of the CL baseline; empty for the other methods.
  std::optional<Tensor> centers;

  // Class centers as used by geometry analysis: the CL center matrix when
  // present, otherwise the unified prototypes.
  const Tensor& class_centers() const;
};

struct TrainHooks {
  // Runs right after the epoch-start renormalization.
  std::function<void(std::size_t epoch, const PrototypeBank&)> on_epoch_start;
  std::function<void(const EpochMetrics&)> on_epoch_end;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochMetrics> history;
};

// Loss or parameters went non-finite. Carries where it happened.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, std::size_t epoch,
                   std::size_t batch, LossBreakdown loss)
      : NumericalError(what), epoch(epoch), batch(batch), loss(loss) {}

  std::size_t epoch;
  std::size_t batch;
  LossBreakdown loss;
};

// Learning-rate multiplier after the drops whose epoch has been reached:
// factor^k, k = #{p : epoch >= floor(p * epochs)}.
double schedule_factor(const TrainConfig& config, std::size_t epoch);
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

// Fraction of samples whose argmax_j c_j . h(x) equals the label.
double evaluate(const FeatureExtractor& model, const Tensor& classifier,
                const Dataset& data);

// Per epoch: renormalize prototypes; per shuffled mini-batch: forward,
// pick sample and class negatives, build the method's objective, then
// momentum-SGD on theta (with weight decay) and on the prototypes (without).
TrainResult train(FeatureExtractor model, PrototypeBank bank,
                  const Dataset& train_data, const Dataset* test_data,
                  const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace protoloss
