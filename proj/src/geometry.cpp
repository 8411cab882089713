#include "protoloss/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "protoloss/csv.hpp"
#include "protoloss/error.hpp"

namespace protoloss::geometry {
namespace {

constexpr double kDegrees = 180.0 / std::numbers::pi;

double clamped_angle(double cosine) {
  return std::acos(std::clamp(cosine, -1.0, 1.0)) * kDegrees;
}

std::vector<double> unit(std::span<const double> v) {
  const double norm = euclidean_norm(v);
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

std::size_t bin_count(double span, double width) {
  return static_cast<std::size_t>(std::ceil(span / width - 1e-9));
}

void require_labels(std::span<const Label> labels, const Tensor& embeddings,
                    const Tensor& centers, const char* op) {
  if (embeddings.rank() != 2 || centers.rank() != 2 ||
      embeddings.cols() != centers.cols()) {
    throw ContractViolation(std::string(op) + ": embedding/center dims differ");
  }
  if (labels.size() != embeddings.rows()) {
    throw ContractViolation(std::string(op) + ": one label per embedding");
  }
  for (Label y : labels) {
    if (y >= centers.rows()) {
      throw ContractViolation(std::string(op) + ": label " +
                              std::to_string(y) + " has no prototype");
    }
  }
}

nlohmann::json histogram_json(const Histogram& h) {
  return {{"edges", h.edges}, {"counts", h.counts}};
}

Histogram histogram_from_json(const nlohmann::json& j) {
  Histogram h;
  h.edges = j.at("edges").get<std::vector<double>>();
  h.counts = j.at("counts").get<std::vector<std::size_t>>();
  return h;
}

}  // namespace

Tensor inter_class_angles(const Tensor& centers) {
  if (centers.rank() != 2) throw ContractViolation("centers must be [M, d]");
  const std::size_t m = centers.rows();
  std::vector<std::vector<double>> units;
  for (std::size_t j = 0; j < m; ++j) {
    if (euclidean_norm(centers.row(j)) == 0.0) {
      throw DegeneratePrototypeError("center " + std::to_string(j) +
                                     " has zero norm");
    }
    units.push_back(unit(centers.row(j)));
  }
  Tensor angles(Shape{m, m});
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = j + 1; k < m; ++k) {
      const double a = clamped_angle(dot(units[j], units[k]));
      angles.at(j, k) = a;
      angles.at(k, j) = a;
    }
  }
  return angles;
}

SeparationStats separation_stats(const Tensor& angles) {
  if (angles.rank() != 2 || angles.rows() != angles.cols() ||
      angles.rows() < 2) {
    throw ContractViolation("separation_stats needs an M x M matrix, M >= 2");
  }
  const std::size_t m = angles.rows();
  SeparationStats s;
  s.min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      if (k == j) continue;
      nearest = std::min(nearest, angles.at(j, k));
    }
    s.nearest.push_back(nearest);
    s.min_sep = std::min(s.min_sep, nearest);
  }
  double total = 0.0;
  for (double v : s.nearest) total += v;
  s.mean_sep = total / static_cast<double>(m);
  double var = 0.0;
  for (double v : s.nearest) var += (v - s.mean_sep) * (v - s.mean_sep);
  s.std_sep = std::sqrt(var / static_cast<double>(m));
  return s;
}

IntraAngles intra_class_angles(const Tensor& embeddings,
                               std::span<const Label> labels,
                               const Tensor& centers) {
  require_labels(labels, embeddings, centers, "intra_class_angles");
  std::vector<std::vector<double>> units;
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    if (euclidean_norm(centers.row(j)) == 0.0) {
      throw DegeneratePrototypeError("center " + std::to_string(j) +
                                     " has zero norm");
    }
    units.push_back(unit(centers.row(j)));
  }
  IntraAngles out;
  out.degrees.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto h = embeddings.row(i);
    const double norm = euclidean_norm(h);
    if (norm == 0.0) {
      out.degrees.push_back(90.0);
      out.undefined.push_back(i);
      continue;
    }
    out.degrees.push_back(clamped_angle(dot(h, units[labels[i]]) / norm));
  }
  return out;
}

ScrResult scr(const Tensor& embeddings, std::span<const Label> labels,
              const Tensor& centers) {
  require_labels(labels, embeddings, centers, "scr");
  const std::size_t m = centers.rows();
  if (m < 2) throw ContractViolation("scr needs at least two classes");

  std::vector<double> spread(m, 0.0);
  std::vector<std::size_t> counts(m, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    spread[labels[i]] +=
        std::sqrt(squared_distance(embeddings.row(i), centers.row(labels[i])));
    ++counts[labels[i]];
  }

  ScrResult out;
  out.per_class.assign(m, std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (counts[j] == 0) {
      out.empty_classes.push_back(j);
      continue;
    }
    double separation = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      if (k == j) continue;
      separation = std::min(
          separation, std::sqrt(squared_distance(centers.row(k), centers.row(j))));
    }
    const double compactness = spread[j] / static_cast<double>(counts[j]);
    if (compactness == 0.0) {
      out.per_class[j] = std::numeric_limits<double>::infinity();
      out.infinite_classes.push_back(j);
      continue;
    }
    out.per_class[j] = separation / compactness;
    total += out.per_class[j];
    ++used;
  }
  out.value = used ? total / static_cast<double>(used)
                   : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Histogram angle_histogram(std::span<const double> degrees, double bin_width) {
  if (!(bin_width > 0.0)) throw ContractViolation("bin_width must be > 0");
  const std::size_t bins = std::max<std::size_t>(1, bin_count(180.0, bin_width));
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < bins; ++i) {
    h.edges.push_back(static_cast<double>(i) * bin_width);
  }
  h.edges.push_back(180.0);
  for (double v : degrees) {
    const double clamped = std::clamp(v, 0.0, 180.0);
    auto bin = static_cast<std::size_t>(std::floor(clamped / bin_width));
    ++h.counts[std::min(bin, bins - 1)];
  }
  return h;
}

SphericalPoint spherical_coordinates(std::span<const double> v) {
  if (v.size() != 3) {
    throw ContractViolation("spherical coordinates need a 3-vector");
  }
  const double norm = euclidean_norm(v);
  if (norm == 0.0) throw ContractViolation("direction of a zero vector");
  const double x = v[0] / norm, y = v[1] / norm, z = v[2] / norm;
  SphericalPoint p;
  p.theta = clamped_angle(z);
  p.phi = (x == 0.0 && y == 0.0) ? 0.0 : std::atan2(y, x) * kDegrees;
  if (p.phi >= 180.0) p.phi -= 360.0;
  return p;
}

SphereHistogram spherical_surface_histogram(const Tensor& embeddings,
                                            std::span<const Label> labels,
                                            const Tensor& centers,
                                            const Tensor& weights,
                                            double cell_degrees) {
  if (embeddings.rank() != 2 || embeddings.cols() != 3) {
    throw ConfigError("sphere histogram only supports a 3-dimensional latent "
                      "space");
  }
  require_labels(labels, embeddings, centers, "spherical_surface_histogram");
  if (!(cell_degrees > 0.0)) throw ContractViolation("cell size must be > 0");

  SphereHistogram h;
  h.cell_degrees = cell_degrees;
  h.phi_bins = bin_count(360.0, cell_degrees);
  h.theta_bins = bin_count(180.0, cell_degrees);
  h.num_classes = centers.rows();
  h.counts.assign(h.num_classes * h.theta_bins * h.phi_bins, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (euclidean_norm(embeddings.row(i)) == 0.0) continue;
    const SphericalPoint p = spherical_coordinates(embeddings.row(i));
    const auto pb = std::min(
        h.phi_bins - 1,
        static_cast<std::size_t>(std::floor((p.phi + 180.0) / cell_degrees)));
    const auto tb = std::min(
        h.theta_bins - 1,
        static_cast<std::size_t>(std::floor(p.theta / cell_degrees)));
    ++h.counts[(labels[i] * h.theta_bins + tb) * h.phi_bins + pb];
  }
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    h.markers.push_back({"center", j, spherical_coordinates(centers.row(j))});
  }
  for (std::size_t j = 0; j < weights.rows(); ++j) {
    h.markers.push_back({"weight", j, spherical_coordinates(weights.row(j))});
  }
  return h;
}

GeometryReport build_report(const Tensor& embeddings,
                            std::span<const Label> labels,
                            const Tensor& centers, double bin_width) {
  GeometryReport r;
  r.num_classes = centers.rows();
  r.dim = centers.cols();

  const Tensor angles = inter_class_angles(centers);
  const SeparationStats sep = separation_stats(angles);
  r.min_sep = sep.min_sep;
  r.mean_sep = sep.mean_sep;
  r.std_sep = sep.std_sep;
  std::vector<double> pairs;
  for (std::size_t j = 0; j < angles.rows(); ++j) {
    for (std::size_t k = j + 1; k < angles.cols(); ++k) {
      pairs.push_back(angles.at(j, k));
    }
  }
  r.inter_hist = angle_histogram(pairs, bin_width);

  const IntraAngles intra = intra_class_angles(embeddings, labels, centers);
  double total = 0.0;
  for (double v : intra.degrees) total += v;
  r.mean_intra_angle =
      intra.degrees.empty() ? 0.0
                            : total / static_cast<double>(intra.degrees.size());
  r.undefined_intra_angles = intra.undefined.size();
  r.intra_hist = angle_histogram(intra.degrees, bin_width);

  r.scr = scr(embeddings, labels, centers);
  return r;
}

std::string report_to_json(const GeometryReport& r) {
  // JSON has no infinity or NaN; those per-class ratios become null.
  nlohmann::json per_class = nlohmann::json::array();
  for (double v : r.scr.per_class) {
    per_class.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
  }
  nlohmann::json j = {
      {"num_classes", r.num_classes},
      {"dim", r.dim},
      {"min_sep", r.min_sep},
      {"mean_sep", r.mean_sep},
      {"std_sep", r.std_sep},
      {"scr", std::isfinite(r.scr.value) ? nlohmann::json(r.scr.value)
                                         : nlohmann::json()},
      {"scr_per_class", per_class},
      {"scr_empty_classes", r.scr.empty_classes},
      {"scr_infinite_classes", r.scr.infinite_classes},
      {"mean_intra_angle", r.mean_intra_angle},
      {"undefined_intra_angles", r.undefined_intra_angles},
      {"inter_hist", histogram_json(r.inter_hist)},
      {"intra_hist", histogram_json(r.intra_hist)},
  };
  return j.dump(2) + "\n";
}

GeometryReport report_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  GeometryReport r;
  r.num_classes = j.at("num_classes").get<std::size_t>();
  r.dim = j.at("dim").get<std::size_t>();
  r.min_sep = j.at("min_sep").get<double>();
  r.mean_sep = j.at("mean_sep").get<double>();
  r.std_sep = j.at("std_sep").get<double>();
  const auto& scr_value = j.at("scr");
  r.scr.value = scr_value.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                    : scr_value.get<double>();
  for (const auto& v : j.at("scr_per_class")) {
    r.scr.per_class.push_back(v.is_null()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : v.get<double>());
  }
  r.scr.empty_classes = j.at("scr_empty_classes").get<std::vector<std::size_t>>();
  r.scr.infinite_classes =
      j.at("scr_infinite_classes").get<std::vector<std::size_t>>();
  r.mean_intra_angle = j.at("mean_intra_angle").get<double>();
  r.undefined_intra_angles = j.at("undefined_intra_angles").get<std::size_t>();
  r.inter_hist = histogram_from_json(j.at("inter_hist"));
  r.intra_hist = histogram_from_json(j.at("intra_hist"));
  return r;
}

std::string histogram_csv(const Histogram& hist) {
  std::ostringstream out;
  out << "edge_low,edge_high,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    out << csv::format_double(hist.edges[i]) << ','
        << csv::format_double(hist.edges[i + 1]) << ',' << hist.counts[i]
        << '\n';
  }
  return out.str();
}

std::string sphere_histogram_csv(const SphereHistogram& hist) {
  std::ostringstream out;
  out << "phi_bin,theta_bin,class,count\n";
  for (std::size_t c = 0; c < hist.num_classes; ++c) {
    for (std::size_t t = 0; t < hist.theta_bins; ++t) {
      for (std::size_t p = 0; p < hist.phi_bins; ++p) {
        const std::size_t n = hist.count(c, p, t);
        if (n) out << p << ',' << t << ',' << c << ',' << n << '\n';
      }
    }
  }
  return out.str();
}

std::string sphere_markers_csv(const SphereHistogram& hist) {
  std::ostringstream out;
  out << "kind,class,phi,theta\n";
  for (const SphereMarker& m : hist.markers) {
    out << m.kind << ',' << m.cls << ',' << csv::format_double(m.position.phi)
        << ',' << csv::format_double(m.position.theta) << '\n';
  }
  return out.str();
}

}  // namespace protoloss::geometry
