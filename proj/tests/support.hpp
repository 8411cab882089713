#pragma once

#include <random>

#include "protoloss/tape.hpp"
#include "protoloss/tensor.hpp"

namespace protoloss::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Same magnitudes as random_tensor but bounded away from zero, for ops with a
// kink or singularity there.
inline Tensor random_away_from_zero(Shape shape, std::mt19937_64& rng,
                                    double min_abs = 0.2) {
  std::uniform_real_distribution<double> u(min_abs, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

// sum(v * w) for a fixed random w: reduces any tensor to a scalar while giving
// every coordinate a distinct adjoint.
inline Var weighted_sum(Var v, const Tensor& w) {
  return sum(mul(v, v.tape->constant(w)));
}

}  // namespace protoloss::testing
