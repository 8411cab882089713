#pragma once

#include <string>

#include "protoloss/geometry.hpp"

namespace protoloss::svg {

// Bar chart of an angle histogram.
std::string histogram(const geometry::Histogram& hist, const std::string& title,
                      const std::string& x_label);

// Equirectangular (phi, theta) map: one translucent cell per non-empty
// histogram cell colored by class, circles for centers, crosses for weights.
std::string sphere_map(const geometry::SphereHistogram& hist,
                       const std::string& title);

}  // namespace protoloss::svg
