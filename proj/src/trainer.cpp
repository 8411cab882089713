#include "protoloss/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace protoloss {
namespace {

// Heavy-ball momentum in the usual deep-learning form:
//   v <- mu * v + (g + wd * p);  p <- p - lr * v
void sgd_step(Tensor& param, Tensor& velocity, const Tensor& grad, double lr,
              double momentum, double weight_decay) {
  auto p = param.data();
  auto v = velocity.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + (g[i] + weight_decay * p[i]);
    p[i] -= lr * v[i];
  }
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.ce += w * b.ce;
  acc.pos += w * b.pos;
  acc.neg_sample += w * b.neg_sample;
  acc.neg_class += w * b.neg_class;
  acc.total += w * b.total;
}

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.ce) && std::isfinite(b.pos) &&
         std::isfinite(b.neg_sample) && std::isfinite(b.neg_class) &&
         std::isfinite(b.total);
}

}  // namespace

const char* to_string(Method method) {
  switch (method) {
    case Method::kCE: return "CE";
    case Method::kCL: return "CL";
    case Method::kDPP: return "DPP";
    case Method::kDPNP: return "DPNP";
  }
  return "?";
}

Method parse_method(const std::string& text) {
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  for (Method m : {Method::kCE, Method::kCL, Method::kDPP, Method::kDPNP}) {
    if (upper == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + text + "' (expected CE, CL, DPP, DPNP)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw ConfigError("train.eta must be > 0");
  }
  // eta_c = 0 freezes the prototypes (a fixed classifier).
  if (!(eta_c >= 0.0) || !std::isfinite(eta_c)) {
    throw ConfigError("train.eta_c must be >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train.momentum must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(lr_drop_factor > 0.0 && lr_drop_factor < 1.0)) {
    throw ConfigError("train.lr_drop_factor must be in (0, 1)");
  }
  double previous = 0.0;
  for (double p : lr_drop_points) {
    if (!(p > previous && p < 1.0)) {
      throw ConfigError(
          "train.lr_drop_points must be strictly increasing in (0, 1)");
    }
    previous = p;
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("train.alpha must be > 0");
  }
  if (!(repulsion.eps >= 0.0)) throw ConfigError("train.repulsion_eps must be >= 0");
  loss_weights.validate();
}

const Tensor& TrainState::class_centers() const {
  return centers ? *centers : bank.centers();
}

double schedule_factor(const TrainConfig& config, std::size_t epoch) {
  double factor = 1.0;
  for (double p : config.lr_drop_points) {
    const auto drop_epoch =
        static_cast<std::size_t>(std::floor(p * static_cast<double>(config.epochs)));
    if (epoch >= drop_epoch) factor *= config.lr_drop_factor;
  }
  return factor;
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  return config.eta * schedule_factor(config, epoch);
}

double evaluate(const FeatureExtractor& model, const Tensor& classifier,
                const Dataset& data) {
  if (data.size() == 0) throw ContractViolation("evaluate: empty dataset");
  const Tensor h = embed(model, data.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t best = 0;
    double best_score = dot(h.row(i), classifier.row(0));
    for (std::size_t j = 1; j < classifier.rows(); ++j) {
      const double s = dot(h.row(i), classifier.row(j));
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(FeatureExtractor model, PrototypeBank bank,
                  const Dataset& train_data, const Dataset* test_data,
                  const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  train_data.validate();
  if (bank.num_classes() != train_data.num_classes) {
    throw ContractViolation("prototype bank has " +
                            std::to_string(bank.num_classes()) +
                            " classes, data has " +
                            std::to_string(train_data.num_classes));
  }
  if (bank.dim() != model.latent_dim()) {
    throw ContractViolation("prototype dim differs from the model latent dim");
  }
  if (train_data.input_dim() != model.input_dim()) {
    throw ContractViolation("data input dim differs from the model input dim");
  }

  TrainResult result;
  TrainState& state = result.state;
  state.model = std::move(model);
  state.bank = std::move(bank);
  if (config.method == Method::kCL) {
    state.centers = Tensor(state.bank.centers().shape());
  }

  std::vector<Tensor> weight_velocity, bias_velocity;
  for (const Tensor& w : state.model.weights()) {
    weight_velocity.push_back(Tensor::zeros_like(w));
  }
  for (const Tensor& b : state.model.biases()) {
    bias_velocity.push_back(Tensor::zeros_like(b));
  }
  Tensor proto_velocity = Tensor::zeros_like(state.bank.centers());
  Tensor center_velocity = Tensor::zeros_like(state.bank.centers());

  LossWeights weights = config.loss_weights;
  if (config.method == Method::kCE) weights = {0.0, 0.0, 0.0};
  if (config.method == Method::kDPP) weights.neg_sample = weights.neg_class = 0.0;

  std::mt19937_64 rng(config.seed);
  const std::size_t layers = state.model.num_layers();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    renormalize(state.bank);
    if (max_norm_deviation(state.bank) > 1e-9) {
      throw NumericalError("renormalization left a prototype off the sphere");
    }
    if (hooks.on_epoch_start) hooks.on_epoch_start(epoch, state.bank);

    const double factor = schedule_factor(config, epoch);
    const double lr = config.eta * factor;
    const double lr_c = config.eta_c * factor;

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.lr = lr;

    const auto plan = batches(train_data.size(), config.batch_size, rng);
    for (std::size_t b = 0; b < plan.size(); ++b) {
      const Batch batch = gather_batch(train_data, plan[b]);

      Tape tape;
      const MlpBinding net = bind(tape, state.model);
      const BoundPrototypes protos = bind(tape, state.bank);
      const Var h = forward(net, tape.constant(batch.features));

      Objective objective;
      std::optional<Var> centers_var;
      if (config.method == Method::kCL) {
        centers_var = tape.leaf(*state.centers);
        objective = cl_loss(h, protos, *centers_var, batch.labels, weights.pos);
      } else {
        objective =
            dpnp_loss(h, protos, batch.labels, weights, config.repulsion);
      }
      if (!finite(objective.breakdown)) {
        throw TrainingDiverged("non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(b),
                               epoch, b, objective.breakdown);
      }

      std::vector<Var> leaves = net.parameters();
      leaves.push_back(protos.matrix);
      if (centers_var) leaves.push_back(*centers_var);
      const std::vector<Tensor> grads = tape.gradients(objective.total, leaves);

      for (std::size_t l = 0; l < layers; ++l) {
        sgd_step(state.model.weights()[l], weight_velocity[l], grads[2 * l], lr,
                 config.momentum, config.weight_decay);
        sgd_step(state.model.biases()[l], bias_velocity[l], grads[2 * l + 1],
                 lr, config.momentum, config.weight_decay);
      }
      sgd_step(state.bank.centers(), proto_velocity, grads[2 * layers], lr_c,
               config.momentum, 0.0);
      if (centers_var) {
        sgd_step(*state.centers, center_velocity, grads[2 * layers + 1], lr_c,
                 config.momentum, 0.0);
      }
      if (!state.model.all_finite() || !state.bank.centers().all_finite()) {
        throw TrainingDiverged("parameters went non-finite at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(b),
                               epoch, b, objective.breakdown);
      }

      accumulate(metrics.loss, objective.breakdown,
                 static_cast<double>(plan[b].size()));
    }
    const double n = static_cast<double>(train_data.size());
    metrics.loss.ce /= n;
    metrics.loss.pos /= n;
    metrics.loss.neg_sample /= n;
    metrics.loss.neg_class /= n;
    metrics.loss.total /= n;

    metrics.train_accuracy =
        evaluate(state.model, state.bank.centers(), train_data);
    if (test_data != nullptr && test_data->size() > 0) {
      metrics.test_accuracy =
          evaluate(state.model, state.bank.centers(), *test_data);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(metrics);
    result.history.push_back(metrics);
  }
  return result;
}

}  // namespace protoloss
