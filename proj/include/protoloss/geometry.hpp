#pragma once

// Feature-space geometry instruments: inter-class angles between class
// centers, their separation statistics, intra-class angles, the
// separation-to-compactness ratio (SCR), and angle histograms.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "protoloss/prototypes.hpp"
#include "protoloss/tensor.hpp"

namespace protoloss::geometry {

inline constexpr double kDefaultBinWidth = 2.0;

// M x M matrix of angles in degrees between unit-normalized rows; zero
// diagonal, bitwise symmetric. Throws DegeneratePrototypeError on a zero row.
Tensor inter_class_angles(const Tensor& centers);

struct SeparationStats {
  double min_sep = 0.0;   // smallest off-diagonal angle
  double mean_sep = 0.0;  // mean nearest-neighbor angle
  double std_sep = 0.0;   // population std of nearest-neighbor angles
  std::vector<double> nearest;
};

SeparationStats separation_stats(const Tensor& angles);

struct IntraAngles {
  std::vector<double> degrees;
  // Samples with a zero embedding; recorded as 90 degrees.
  std::vector<std::size_t> undefined;
};

IntraAngles intra_class_angles(const Tensor& embeddings,
                               std::span<const Label> labels,
                               const Tensor& centers);

struct ScrResult {
  double value = 0.0;  // mean over classes with a finite, defined ratio
  std::vector<double> per_class;           // NaN for empty classes
  std::vector<std::size_t> empty_classes;  // excluded: no samples
  std::vector<std::size_t> infinite_classes;  // all samples on the center
};

// Per class: distance to the nearest other center over the mean distance of
// the class's samples to its own center. Raw vectors, Euclidean distances.
ScrResult scr(const Tensor& embeddings, std::span<const Label> labels,
              const Tensor& centers);

struct Histogram {
  std::vector<double> edges;  // counts.size() + 1 entries
  std::vector<std::size_t> counts;
};

// Fixed bins over [0, 180]; half-open except the last, which is closed.
Histogram angle_histogram(std::span<const double> degrees,
                          double bin_width = kDefaultBinWidth);

struct SphericalPoint {
  double phi = 0.0;    // azimuth in [-180, 180)
  double theta = 0.0;  // polar angle in [0, 180]
};

// Direction of a 3-vector. At the poles phi is reported as 0.
SphericalPoint spherical_coordinates(std::span<const double> v);

struct SphereMarker {
  std::string kind;  // "center" or "weight"
  std::size_t cls = 0;
  SphericalPoint position;
};

struct SphereHistogram {
  double cell_degrees = kDefaultBinWidth;
  std::size_t phi_bins = 0;
  std::size_t theta_bins = 0;
  std::size_t num_classes = 0;
  std::vector<std::size_t> counts;  // [class][theta_bin][phi_bin]
  std::vector<SphereMarker> markers;

  std::size_t count(std::size_t cls, std::size_t phi_bin,
                    std::size_t theta_bin) const {
    return counts[(cls * theta_bins + theta_bin) * phi_bins + phi_bin];
  }
};

// Requires d == 3. `weights` may equal `centers` (unified prototypes).
SphereHistogram spherical_surface_histogram(
    const Tensor& embeddings, std::span<const Label> labels,
    const Tensor& centers, const Tensor& weights,
    double cell_degrees = kDefaultBinWidth);

struct GeometryReport {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  double min_sep = 0.0;
  double mean_sep = 0.0;
  double std_sep = 0.0;
  ScrResult scr;
  double mean_intra_angle = 0.0;
  std::size_t undefined_intra_angles = 0;
  Histogram inter_hist;
  Histogram intra_hist;
};

GeometryReport build_report(const Tensor& embeddings,
                            std::span<const Label> labels,
                            const Tensor& centers,
                            double bin_width = kDefaultBinWidth);

std::string report_to_json(const GeometryReport& report);
GeometryReport report_from_json(const std::string& text);

// "edge_low,edge_high,count" rows.
std::string histogram_csv(const Histogram& hist);
// "phi_bin,theta_bin,class,count" rows for non-empty cells.
std::string sphere_histogram_csv(const SphereHistogram& hist);
// "kind,class,phi,theta" rows.
std::string sphere_markers_csv(const SphereHistogram& hist);

}  // namespace protoloss::geometry
