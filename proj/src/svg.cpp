#include "protoloss/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace protoloss::svg {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string class_color(std::size_t cls, std::size_t classes) {
  const double hue = 360.0 * static_cast<double>(cls) /
                     static_cast<double>(std::max<std::size_t>(classes, 1));
  return "hsl(" + num(hue) + ",70%,45%)";
}

void header(std::ostringstream& out, double width, double height,
            const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
      << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width)
      << ' ' << num(height) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << escape(title)
      << "</text>\n";
}

}  // namespace

std::string histogram(const geometry::Histogram& hist, const std::string& title,
                      const std::string& x_label) {
  constexpr double kWidth = 640, kHeight = 360;
  constexpr double kLeft = 50, kRight = 20, kTop = 35, kBottom = 45;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const std::size_t peak =
      hist.counts.empty()
          ? 0
          : *std::max_element(hist.counts.begin(), hist.counts.end());
  const double lo = hist.edges.front(), hi = hist.edges.back();

  std::ostringstream out;
  header(out, kWidth, kHeight, title);
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    if (hist.counts[i] == 0) continue;
    const double x0 = kLeft + plot_w * (hist.edges[i] - lo) / (hi - lo);
    const double x1 = kLeft + plot_w * (hist.edges[i + 1] - lo) / (hi - lo);
    const double h = plot_h * static_cast<double>(hist.counts[i]) /
                     static_cast<double>(peak);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(kTop + plot_h - h)
        << "\" width=\"" << num(std::max(x1 - x0 - 0.5, 0.5)) << "\" height=\""
        << num(h) << "\" fill=\"steelblue\"/>\n";
  }
  out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + plot_h)
      << "\" x2=\"" << num(kLeft + plot_w) << "\" y2=\"" << num(kTop + plot_h)
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 180; tick += 30) {
    const double x = kLeft + plot_w * (tick - lo) / (hi - lo);
    out << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + plot_h + 15)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << tick << "</text>\n";
  }
  out << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\""
      << num(kHeight - 10)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"" << num(kLeft - 5) << "\" y=\"" << num(kTop + 10)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
      << peak << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string sphere_map(const geometry::SphereHistogram& hist,
                       const std::string& title) {
  constexpr double kScale = 2.0;  // pixels per degree
  constexpr double kLeft = 40, kTop = 35;
  const double width = kLeft + 360 * kScale + 20;
  const double height = kTop + 180 * kScale + 30;
  std::size_t peak = 1;
  for (std::size_t n : hist.counts) peak = std::max(peak, n);

  std::ostringstream out;
  header(out, width, height, title);
  out << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\""
      << num(360 * kScale) << "\" height=\"" << num(180 * kScale)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  const double cell = hist.cell_degrees * kScale;
  for (std::size_t c = 0; c < hist.num_classes; ++c) {
    const std::string color = class_color(c, hist.num_classes);
    for (std::size_t t = 0; t < hist.theta_bins; ++t) {
      for (std::size_t p = 0; p < hist.phi_bins; ++p) {
        const std::size_t n = hist.count(c, p, t);
        if (!n) continue;
        const double opacity =
            0.2 + 0.8 * static_cast<double>(n) / static_cast<double>(peak);
        out << "<rect x=\"" << num(kLeft + static_cast<double>(p) * cell)
            << "\" y=\"" << num(kTop + static_cast<double>(t) * cell)
            << "\" width=\"" << num(cell) << "\" height=\"" << num(cell)
            << "\" fill=\"" << color << "\" fill-opacity=\"" << num(opacity)
            << "\"/>\n";
      }
    }
  }
  for (const auto& m : hist.markers) {
    const double x = kLeft + (m.position.phi + 180.0) * kScale;
    const double y = kTop + m.position.theta * kScale;
    const std::string color = class_color(m.cls, hist.num_classes);
    if (m.kind == "center") {
      out << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y)
          << "\" r=\"5\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
    } else {
      out << "<path d=\"M" << num(x - 5) << ' ' << num(y - 5) << " L"
          << num(x + 5) << ' ' << num(y + 5) << " M" << num(x - 5) << ' '
          << num(y + 5) << " L" << num(x + 5) << ' ' << num(y - 5)
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    }
  }
  out << "<text x=\"" << num(kLeft + 180 * kScale) << "\" y=\""
      << num(height - 8)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">phi (deg, -180..180) / theta (deg, 0 top .. 180 "
         "bottom)</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace protoloss::svg
