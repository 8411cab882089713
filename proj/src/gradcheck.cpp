#include "protoloss/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace protoloss {
namespace {

double evaluate(const TapeFunction& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.constant(t));
  return f(tape, leaves).value().item();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport check_gradients(const TapeFunction& f,
                                const std::vector<Tensor>& inputs,
                                double step) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, true));
    const Var loss = f(tape, leaves);
    analytic = tape.gradients(loss, leaves);
  }

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double original = probe[k][i];
      probe[k][i] = original + step;
      const double up = evaluate(f, probe);
      probe[k][i] = original - step;
      const double down = evaluate(f, probe);
      probe[k][i] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[k][i], numeric);
      ++report.coordinates_checked;
      if (err > report.max_relative_error || !std::isfinite(err)) {
        report.max_relative_error = err;
        report.worst_input = k;
        report.worst_index = i;
        report.worst_analytic = analytic[k][i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace protoloss
