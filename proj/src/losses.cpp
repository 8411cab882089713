#include "protoloss/losses.hpp"

#include <cmath>

#include "protoloss/error.hpp"

namespace protoloss {
namespace {

void check_labels(std::span<const Label> labels, std::size_t rows,
                  std::size_t num_classes, const char* op) {
  if (labels.size() != rows) {
    throw ContractViolation(std::string(op) + ": " + std::to_string(rows) +
                            " rows but " + std::to_string(labels.size()) +
                            " labels");
  }
  for (Label y : labels) {
    if (y >= num_classes) {
      throw ContractViolation(std::string(op) + ": label " +
                              std::to_string(y) + " out of range [0," +
                              std::to_string(num_classes) + ")");
    }
  }
}

// Differentiable sum of |row|_{1/2} over the rows of `diff`, plus its
// unsmoothed value.
std::pair<Var, double> repulsion_sum(Var diff, const RepulsionOptions& options) {
  const Tensor& v = diff.value();
  double unsmoothed = 0.0;
  if (options.norm == RepulsionNorm::kCoordinateSum) {
    for (double t : v.data()) unsmoothed += std::sqrt(std::abs(t));
    return {sum(half_power(diff, options.eps)), unsmoothed};
  }
  for (std::size_t r = 0; r < v.rows(); ++r) {
    unsmoothed += std::sqrt(euclidean_norm(v.row(r)));
  }
  return {sum(root4(row_sum(square(diff)), options.eps)), unsmoothed};
}

RepulsionTerm skipped_term(Tape& tape) {
  RepulsionTerm term;
  term.value = tape.constant(Tensor::scalar(0.0));
  term.skipped = true;
  return term;
}

void finish(LossBreakdown& b, const LossWeights& w) {
  b.total = b.ce + w.pos * b.pos + w.neg_sample * b.neg_sample +
            w.neg_class * b.neg_class;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {pos, neg_sample, neg_class}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("loss weights must be finite and non-negative");
    }
  }
}

const char* to_string(RepulsionNorm norm) {
  return norm == RepulsionNorm::kEuclidean ? "euclidean" : "coordinate_sum";
}

RepulsionNorm parse_repulsion_norm(const std::string& text) {
  if (text == "euclidean") return RepulsionNorm::kEuclidean;
  if (text == "coordinate_sum") return RepulsionNorm::kCoordinateSum;
  throw ConfigError("unknown repulsion norm '" + text +
                    "' (expected euclidean or coordinate_sum)");
}

Var ce_loss(Var logits, std::span<const Label> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2) throw ContractViolation("ce_loss: logits must be [B, M]");
  check_labels(labels, z.rows(), z.cols(), "ce_loss");
  Tensor one_hot(z.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) one_hot.at(i, labels[i]) = 1.0;
  Tape& tape = *logits.tape;
  const Var picked = sum(mul(logits, tape.constant(std::move(one_hot))));
  const Var normalizers = sum(log_sum_exp(logits));
  return scale(sub(normalizers, picked), 1.0 / static_cast<double>(z.rows()));
}

Var center_term(Var h_batch, Var centers, std::span<const Label> labels) {
  const Tensor& h = h_batch.value();
  const Tensor& c = centers.value();
  if (h.rank() != 2 || c.rank() != 2 || h.cols() != c.cols()) {
    throw ContractViolation("center_term: feature/center dims differ");
  }
  check_labels(labels, h.rows(), c.rows(), "center_term");
  const Var own = gather_rows(centers, {labels.begin(), labels.end()});
  return scale(sum(square(sub(h_batch, own))),
               1.0 / (2.0 * static_cast<double>(h.rows())));
}

RepulsionTerm sample_neg_loss(Var h_batch, Var centers,
                              std::span<const Label> labels,
                              const RepulsionOptions& options) {
  const Tensor& h = h_batch.value();
  const Tensor& c = centers.value();
  if (h.rank() != 2 || c.rank() != 2 || h.cols() != c.cols()) {
    throw ContractViolation("sample_neg_loss: feature/center dims differ");
  }
  check_labels(labels, h.rows(), c.rows(), "sample_neg_loss");
  if (c.rows() < 2) return skipped_term(*h_batch.tape);

  RepulsionTerm term;
  term.negatives = nearest_negatives_for_samples(c, h, labels);
  const Var rivals = gather_rows(centers, term.negatives);
  const auto [total, raw] = repulsion_sum(sub(h_batch, rivals), options);
  const double factor = -1.0 / (2.0 * static_cast<double>(h.rows()));
  term.value = scale(total, factor);
  term.unsmoothed = factor * raw;
  return term;
}

RepulsionTerm class_neg_loss(Var centers, const RepulsionOptions& options) {
  const Tensor& c = centers.value();
  if (c.rank() != 2) throw ContractViolation("class_neg_loss: need [M, d]");
  if (c.rows() < 2) return skipped_term(*centers.tape);

  RepulsionTerm term;
  term.negatives = nearest_negatives_for_classes(c);
  const Var rivals = gather_rows(centers, term.negatives);
  const auto [total, raw] = repulsion_sum(sub(centers, rivals), options);
  const double factor = -1.0 / (2.0 * static_cast<double>(c.rows()));
  term.value = scale(total, factor);
  term.unsmoothed = factor * raw;
  return term;
}

Objective cl_loss(Var h_batch, const BoundPrototypes& classifier, Var centers,
                  std::span<const Label> labels, double lambda_center) {
  if (!(lambda_center >= 0.0)) {
    throw ConfigError("lambda_center must be non-negative");
  }
  const Var ce = ce_loss(logits(classifier, h_batch), labels);
  const Var center = center_term(h_batch, centers, labels);

  Objective out;
  out.breakdown.ce = ce.value().item();
  out.breakdown.pos = center.value().item();
  finish(out.breakdown, LossWeights{lambda_center, 0.0, 0.0});
  out.total = lambda_center > 0.0 ? add(ce, scale(center, lambda_center)) : ce;
  return out;
}

Objective dpp_loss(Var h_batch, const BoundPrototypes& prototypes,
                   std::span<const Label> labels, const LossWeights& weights) {
  weights.validate();
  const Var ce = ce_loss(logits(prototypes, h_batch), labels);
  const Var center = center_term(h_batch, prototypes.matrix, labels);

  Objective out;
  out.breakdown.ce = ce.value().item();
  out.breakdown.pos = center.value().item();
  finish(out.breakdown, LossWeights{weights.pos, 0.0, 0.0});
  out.total = weights.pos > 0.0 ? add(ce, scale(center, weights.pos)) : ce;
  return out;
}

Objective dpnp_loss(Var h_batch, const BoundPrototypes& prototypes,
                    std::span<const Label> labels, const LossWeights& weights,
                    const RepulsionOptions& options) {
  Objective out = dpp_loss(h_batch, prototypes, labels, weights);
  const RepulsionTerm sample =
      sample_neg_loss(h_batch, prototypes.matrix, labels, options);
  const RepulsionTerm cls = class_neg_loss(prototypes.matrix, options);

  out.breakdown.neg_sample = sample.unsmoothed;
  out.breakdown.neg_class = cls.unsmoothed;
  finish(out.breakdown, weights);
  out.negatives_skipped = sample.skipped || cls.skipped;

  // Zero-weight terms stay off the gradient path entirely, so a run with all
  // lambdas at zero differentiates exactly the plain CE graph.
  if (weights.neg_sample > 0.0 && !sample.skipped) {
    out.total = add(out.total, scale(sample.value, weights.neg_sample));
  }
  if (weights.neg_class > 0.0 && !cls.skipped) {
    out.total = add(out.total, scale(cls.value, weights.neg_class));
  }
  return out;
}

}  // namespace protoloss
