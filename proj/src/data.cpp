#include "protoloss/data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "protoloss/csv.hpp"
#include "protoloss/error.hpp"

namespace protoloss {

void Dataset::validate() const {
  if (labels.empty()) throw ContractViolation("dataset is empty");
  if (features.rank() != 2 || features.rows() != labels.size()) {
    throw ContractViolation("dataset features do not match label count");
  }
  for (Label y : labels) {
    if (y >= num_classes) {
      throw ContractViolation("dataset label " + std::to_string(y) +
                              " >= class count " +
                              std::to_string(num_classes));
    }
  }
  if (!features.all_finite()) {
    throw ContractViolation("dataset features contain NaN/Inf");
  }
}

void BlobConfig::validate() const {
  if (classes < 1) throw ConfigError("data.generator.classes must be >= 1");
  if (input_dim < 1) throw ConfigError("data.generator.input_dim must be >= 1");
  if (n_per_class < 1) throw ConfigError("data.generator.n_per_class must be >= 1");
  if (!(center_scale >= 0.0) || !std::isfinite(center_scale)) {
    throw ConfigError("data.generator.center_scale must be >= 0");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("data.generator.noise_sigma must be >= 0");
  }
}

namespace {

void shuffle_in_place(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
}

Dataset assemble(const std::vector<std::vector<double>>& rows,
                 const std::vector<Label>& labels,
                 const std::vector<std::size_t>& order, std::size_t dim,
                 std::size_t classes, Split split) {
  Dataset d;
  d.features = Tensor(Shape{order.size(), dim});
  d.num_classes = classes;
  d.split = split;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& src = rows[order[k]];
    std::copy(src.begin(), src.end(), d.features.row(k).begin());
    d.labels.push_back(labels[order[k]]);
  }
  return d;
}

}  // namespace

TrainTestSplit gaussian_blobs(const BlobConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> centers(config.classes,
                                           std::vector<double>(config.input_dim));
  for (auto& c : centers) {
    double norm = 0.0;
    do {
      for (double& v : c) v = normal(rng);
      norm = euclidean_norm(c);
    } while (norm < 1e-12);
    for (double& v : c) v *= config.center_scale / norm;
  }

  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  std::vector<std::size_t> train_idx, test_idx;
  const std::size_t n_test = config.n_per_class / 5;
  for (std::size_t j = 0; j < config.classes; ++j) {
    for (std::size_t s = 0; s < config.n_per_class; ++s) {
      std::vector<double> x(config.input_dim);
      for (std::size_t t = 0; t < config.input_dim; ++t) {
        x[t] = centers[j][t] + config.noise_sigma * normal(rng);
      }
      (s < config.n_per_class - n_test ? train_idx : test_idx)
          .push_back(rows.size());
      rows.push_back(std::move(x));
      labels.push_back(j);
    }
  }
  shuffle_in_place(train_idx, rng);
  shuffle_in_place(test_idx, rng);
  return {assemble(rows, labels, train_idx, config.input_dim, config.classes,
                   Split::kTrain),
          assemble(rows, labels, test_idx, config.input_dim, config.classes,
                   Split::kTest)};
}

UnitRangeScaler UnitRangeScaler::fit(const Tensor& features) {
  UnitRangeScaler s;
  const std::size_t cols = features.cols();
  s.low_.assign(cols, 0.0);
  s.span_.assign(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = features.rows() ? features.at(0, c) : 0.0;
    double hi = lo;
    for (std::size_t r = 1; r < features.rows(); ++r) {
      lo = std::min(lo, features.at(r, c));
      hi = std::max(hi, features.at(r, c));
    }
    s.low_[c] = lo;
    s.span_[c] = hi - lo;
  }
  return s;
}

void UnitRangeScaler::apply(Tensor& features) const {
  if (features.cols() != low_.size()) {
    throw ContractViolation("scaler fitted on a different feature width");
  }
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      row[c] = span_[c] > 0.0 ? (row[c] - low_[c]) / span_[c] : 0.0;
    }
  }
}

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes,
                 bool rescale, Split split) {
  if (num_classes < 1) throw ConfigError("load_csv: class count must be >= 1");
  const csv::Table table = csv::read(path, false);
  std::size_t first = 0;
  if (!table.rows.empty() && !table.rows[0].second.empty() &&
      table.rows[0].second[0] == "label") {
    first = 1;
  }
  if (table.rows.size() <= first) {
    throw ParseError(path.string() + ": no data rows");
  }
  const std::size_t width = table.rows[first].second.size();
  if (width < 2) {
    throw ParseError(path.string() + ":" +
                     std::to_string(table.rows[first].first) +
                     ": need a label and at least one feature");
  }
  Dataset d;
  d.num_classes = num_classes;
  d.split = split;
  d.features = Tensor(Shape{table.rows.size() - first, width - 1});
  for (std::size_t r = first; r < table.rows.size(); ++r) {
    const auto& [line, cells] = table.rows[r];
    if (cells.size() != width) {
      throw ParseError(path.string() + ":" + std::to_string(line) +
                       ": expected " + std::to_string(width) + " cells, got " +
                       std::to_string(cells.size()));
    }
    const std::size_t label = csv::parse_index(cells[0], line, path);
    if (label >= num_classes) {
      throw ParseError(path.string() + ":" + std::to_string(line) +
                       ": label " + std::to_string(label) +
                       " >= class count " + std::to_string(num_classes));
    }
    d.labels.push_back(label);
    auto row = d.features.row(r - first);
    for (std::size_t c = 1; c < width; ++c) {
      row[c - 1] = csv::parse_double(cells[c], line, path);
    }
  }
  if (!d.features.all_finite()) {
    throw ParseError(path.string() + ": non-finite feature value");
  }
  if (rescale) UnitRangeScaler::fit(d.features).apply(d.features);
  return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "label";
  for (std::size_t c = 0; c < data.input_dim(); ++c) out << ",x" << c;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.features.row(i)) out << ',' << csv::format_double(v);
    out << '\n';
  }
  csv::write_file(path, out.str());
}

std::vector<std::vector<std::size_t>> batches(std::size_t n,
                                              std::size_t batch_size,
                                              std::mt19937_64& rng) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle_in_place(order, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

Batch gather_batch(const Dataset& data, std::span<const std::size_t> indices) {
  Batch b;
  b.features = Tensor(Shape{indices.size(), data.input_dim()});
  b.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = data.features.row(indices[k]);
    std::copy(src.begin(), src.end(), b.features.row(k).begin());
    b.labels.push_back(data.labels[indices[k]]);
  }
  return b;
}

}  // namespace protoloss
