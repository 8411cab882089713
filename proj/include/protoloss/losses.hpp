#pragma once

#include <span>
#include <string>
#include <vector>

#include "protoloss/prototypes.hpp"
#include "protoloss/tape.hpp"

namespace protoloss {

struct LossWeights {
  double pos = 0.1;
  double neg_sample = 0.1;
  double neg_class = 0.1;

  void validate() const;
};

// How the sub-linear repulsion distance |v|_{1/2} is measured.
//   kEuclidean:     |v|_2^{1/2}          (rotation invariant, default)
//   kCoordinateSum: sum_t |v_t|^{1/2}    (separable per coordinate)
enum class RepulsionNorm { kEuclidean, kCoordinateSum };

const char* to_string(RepulsionNorm norm);
RepulsionNorm parse_repulsion_norm(const std::string& text);

struct RepulsionOptions {
  // Smoothing added under the root so the gradient stays finite at v = 0.
  double eps = 1e-12;
  RepulsionNorm norm = RepulsionNorm::kEuclidean;
};

// The four summands of the composite objective. `pos` is the unweighted
// center term; the neg_* fields are the signed (<= 0) repulsion values
// evaluated without smoothing. total is always the lambda-weighted sum.
struct LossBreakdown {
  double ce = 0.0;
  double pos = 0.0;
  double neg_sample = 0.0;
  double neg_class = 0.0;
  double total = 0.0;
};

struct RepulsionTerm {
  Var value;                           // smoothed, differentiable
  double unsmoothed = 0.0;             // same quantity with eps = 0
  bool skipped = false;                // M == 1: no negative exists
  std::vector<std::size_t> negatives;  // selected rival per row
};

struct Objective {
  Var total;
  LossBreakdown breakdown;
  bool negatives_skipped = false;
};

// -(1/B) sum_i log softmax(logits_i)[y_i], via row-wise log-sum-exp.
Var ce_loss(Var logits, std::span<const Label> labels);

// (1/(2B)) sum_i |h_i - c_{y_i}|^2.
Var center_term(Var h_batch, Var centers, std::span<const Label> labels);

// -(1/(2B)) sum_i |h_i - c_neg(i)|_{1/2}, rival chosen by nearest distance.
RepulsionTerm sample_neg_loss(Var h_batch, Var centers,
                              std::span<const Label> labels,
                              const RepulsionOptions& options = {});

// -(1/(2M)) sum_j |c_j - c_neg(j)|_{1/2}.
RepulsionTerm class_neg_loss(Var centers, const RepulsionOptions& options = {});

// Center-loss baseline: classifier weights and centers are two separate
// matrices, both trained by gradient.
Objective cl_loss(Var h_batch, const BoundPrototypes& classifier, Var centers,
                  std::span<const Label> labels, double lambda_center);

// Scaled-softmax CE plus center attraction, both reading one prototype matrix.
Objective dpp_loss(Var h_batch, const BoundPrototypes& prototypes,
                   std::span<const Label> labels, const LossWeights& weights);

// DPP plus sample- and class-level repulsion from the nearest rival prototype.
Objective dpnp_loss(Var h_batch, const BoundPrototypes& prototypes,
                    std::span<const Label> labels, const LossWeights& weights,
                    const RepulsionOptions& options = {});

}  // namespace protoloss
