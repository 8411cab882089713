#include "protoloss/prototypes.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "protoloss/csv.hpp"
#include "protoloss/error.hpp"

namespace protoloss {
namespace {

constexpr double kMinRowNorm = 1e-12;

}  // namespace

PrototypeBank::PrototypeBank(Tensor centers, double alpha)
    : centers_(std::move(centers)), alpha_(alpha) {
  if (centers_.rank() != 2 || centers_.rows() < 1 || centers_.cols() < 1) {
    throw ConfigError("prototype bank needs an M x d matrix with M, d >= 1");
  }
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
    throw ConfigError("prototype radius alpha must be positive");
  }
}

PrototypeBank init_prototypes(std::size_t num_classes, std::size_t dim,
                              double alpha, std::uint64_t seed) {
  if (num_classes < 1 || dim < 1) {
    throw ConfigError("init_prototypes: M and d must be >= 1");
  }
  if (!(alpha > 0.0)) throw ConfigError("init_prototypes: alpha must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor centers(Shape{num_classes, dim});
  for (double& v : centers.data()) v = normal(rng);
  PrototypeBank bank(std::move(centers), alpha);
  renormalize(bank);
  for (std::size_t j = 0; j < num_classes; ++j) {
    for (std::size_t k = j + 1; k < num_classes; ++k) {
      if (squared_distance(bank.row(j), bank.row(k)) == 0.0) {
        throw DegeneratePrototypeError("init_prototypes drew duplicate rows");
      }
    }
  }
  return bank;
}

void renormalize(PrototypeBank& bank) {
  Tensor& c = bank.centers();
  for (std::size_t j = 0; j < c.rows(); ++j) {
    auto row = c.row(j);
    const double norm = euclidean_norm(row);
    if (!(norm >= kMinRowNorm) || !std::isfinite(norm)) {
      throw DegeneratePrototypeError("prototype " + std::to_string(j) +
                                     " has degenerate norm " +
                                     csv::format_double(norm));
    }
    const double factor = bank.alpha() / norm;
    for (double& v : row) v *= factor;
  }
}

double max_norm_deviation(const PrototypeBank& bank) {
  double worst = 0.0;
  for (std::size_t j = 0; j < bank.num_classes(); ++j) {
    const double dev =
        std::abs(euclidean_norm(bank.row(j)) - bank.alpha()) / bank.alpha();
    worst = std::max(worst, dev);
  }
  return worst;
}

BoundPrototypes bind(Tape& tape, const PrototypeBank& bank,
                     bool requires_grad) {
  return {tape.leaf(bank.centers(), requires_grad), bank.alpha()};
}

Var logits(const BoundPrototypes& prototypes, Var h_batch) {
  return scale(matmul_nt(h_batch, prototypes.matrix), 1.0 / prototypes.alpha);
}

std::optional<std::size_t> nearest_negative_for_sample(
    const Tensor& centers, std::span<const double> h, Label label) {
  if (h.size() != centers.cols()) {
    throw ContractViolation("nearest_negative_for_sample: dimension mismatch");
  }
  if (label >= centers.rows()) {
    throw ContractViolation("nearest_negative_for_sample: label " +
                            std::to_string(label) + " out of range");
  }
  std::optional<std::size_t> best;
  double best_dist = 0.0;
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    if (j == label) continue;
    const double d = squared_distance(h, centers.row(j));
    if (!best || d < best_dist) {
      best = j;
      best_dist = d;
    }
  }
  return best;
}

std::optional<std::size_t> nearest_negative_for_class(const Tensor& centers,
                                                      std::size_t j) {
  if (j >= centers.rows()) {
    throw ContractViolation("nearest_negative_for_class: class out of range");
  }
  std::optional<std::size_t> best;
  double best_dist = 0.0;
  for (std::size_t k = 0; k < centers.rows(); ++k) {
    if (k == j) continue;
    const double d = squared_distance(centers.row(j), centers.row(k));
    if (!best || d < best_dist) {
      best = k;
      best_dist = d;
    }
  }
  return best;
}

std::vector<std::size_t> nearest_negatives_for_samples(
    const Tensor& centers, const Tensor& h_batch,
    std::span<const Label> labels) {
  if (h_batch.rows() != labels.size()) {
    throw ContractViolation("one label per feature row required");
  }
  std::vector<std::size_t> out;
  if (centers.rows() < 2) return out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.push_back(*nearest_negative_for_sample(centers, h_batch.row(i),
                                               labels[i]));
  }
  return out;
}

std::vector<std::size_t> nearest_negatives_for_classes(const Tensor& centers) {
  std::vector<std::size_t> out;
  if (centers.rows() < 2) return out;
  out.reserve(centers.rows());
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    out.push_back(*nearest_negative_for_class(centers, j));
  }
  return out;
}

void save_prototypes_csv(const Tensor& centers,
                         const std::filesystem::path& path) {
  std::ostringstream out;
  out << "class";
  for (std::size_t t = 0; t < centers.cols(); ++t) out << ",c" << t;
  out << '\n';
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    out << j;
    for (double v : centers.row(j)) out << ',' << csv::format_double(v);
    out << '\n';
  }
  csv::write_file(path, out.str());
}

Tensor load_prototypes_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  if (table.header.size() < 2 || table.header.front() != "class") {
    throw ParseError(path.string() + ":1: expected header class,c0,...");
  }
  const std::size_t dim = table.header.size() - 1;
  Tensor centers(Shape{table.rows.size(), dim});
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& [line, cells] = table.rows[r];
    if (cells.size() != dim + 1) {
      throw ParseError(path.string() + ":" + std::to_string(line) +
                       ": expected " + std::to_string(dim + 1) + " cells");
    }
    const std::size_t cls = csv::parse_index(cells[0], line, path);
    if (cls != r) {
      throw ParseError(path.string() + ":" + std::to_string(line) +
                       ": classes must be listed in order 0..M-1");
    }
    for (std::size_t t = 0; t < dim; ++t) {
      centers.at(r, t) = csv::parse_double(cells[t + 1], line, path);
    }
  }
  if (centers.rows() == 0) throw ParseError(path.string() + ": no classes");
  return centers;
}

}  // namespace protoloss
