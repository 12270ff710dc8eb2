#ifndef MSUNET_TOOLS_SVG_H_
#define MSUNET_TOOLS_SVG_H_

#include <span>
#include <string>
#include <vector>

namespace msunet::cli {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
  double opacity = 1.0;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
  // Axis limits; lo == hi means "fit the data".
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;
};

// Polyline plot with axes, ticks and a legend. Output bytes depend only on
// the inputs (fixed-precision coordinates).
std::string LinePlotSvg(const PlotSpec& spec, std::span<const Series> series);

// Density-normalised histogram as a step outline.
Series HistogramSeries(std::span<const double> values, int bins, double lo, double hi,
                       std::string label, std::string color);

}  // namespace msunet::cli

#endif  // MSUNET_TOOLS_SVG_H_
