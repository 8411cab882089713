#pragma once

// Central finite-difference verification of tape gradients.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "protoloss/tape.hpp"

namespace protoloss {

// Builds a scalar loss on `tape` from leaves holding the given inputs.
using TapeFunction = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
// turning rounding noise into huge relative errors.
double relative_error(double analytic, double numeric, double floor = 1e-3);

// Evaluates f once with differentiation, then perturbs every coordinate of
// every input by +-step and compares against the central difference.
GradCheckReport check_gradients(const TapeFunction& f,
                                const std::vector<Tensor>& inputs,
                                double step = 1e-5);

}  // namespace protoloss
