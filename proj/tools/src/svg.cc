#include "svg.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace msunet::cli {
namespace {

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void Fit(const std::vector<double>& v, double& lo, double& hi) {
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
}

}  // namespace

std::string LinePlotSvg(const PlotSpec& spec, std::span<const Series> series) {
  double x_lo = spec.x_lo, x_hi = spec.x_hi, y_lo = spec.y_lo, y_hi = spec.y_hi;
  if (x_lo == x_hi) {
    x_lo = INFINITY;
    x_hi = -INFINITY;
    for (const auto& s : series) Fit(s.x, x_lo, x_hi);
  }
  if (y_lo == y_hi) {
    y_lo = 0.0;
    y_hi = -INFINITY;
    for (const auto& s : series) Fit(s.y, y_lo, y_hi);
    y_hi *= 1.05;
  }
  if (!std::isfinite(x_lo) || !std::isfinite(x_hi) || x_hi <= x_lo) {
    x_lo = 0.0;
    x_hi = 1.0;
  }
  if (!std::isfinite(y_hi) || y_hi <= y_lo) y_hi = y_lo + 1.0;

  const double left = 64, right = 16, top = 36, bottom = 48;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      spec.width, spec.height, spec.width, spec.height);
  out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", spec.width, spec.height);
  out += fmt::format("<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
                     spec.width / 2.0, Escape(spec.title));
  out += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"black\"/>\n",
                     left, top, pw, ph);
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / kTicks;
    const double yv = y_lo + (y_hi - y_lo) * i / kTicks;
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n",
                       px(xv), top + ph, top + ph + 4);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", px(xv),
                       top + ph + 16, xv);
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n",
                       left - 4, py(yv), left);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", left - 6,
                       py(yv) + 4, yv);
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                     spec.height - 10.0, Escape(spec.x_label));
  out += fmt::format(
      "<text x=\"14\" y=\"{0:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {0:.1f})\">{1}</text>\n",
      top + ph / 2, Escape(spec.y_label));

  for (size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    std::string points;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double cy = std::clamp(py(s.y[i]), top, top + ph);
      points += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), cy);
    }
    if (!points.empty()) points.pop_back();
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" stroke-opacity=\"{:.2f}\"{} points=\"{}\"/>\n",
                       s.color, s.opacity, s.dashed ? " stroke-dasharray=\"5,3\"" : "", points);
    const double ly = top + 14 + 16.0 * si;
    out += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"{4}/>\n",
                       left + pw - 150, ly, left + pw - 130, s.color,
                       s.dashed ? " stroke-dasharray=\"5,3\"" : "");
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", left + pw - 125, ly + 4, Escape(s.label));
  }
  out += "</svg>\n";
  return out;
}

Series HistogramSeries(std::span<const double> values, int bins, double lo, double hi,
                       std::string label, std::string color) {
  Series s;
  s.label = std::move(label);
  s.color = std::move(color);
  s.opacity = 0.6;
  s.dashed = true;
  if (bins < 1 || !(hi > lo)) return s;
  std::vector<double> counts(static_cast<size_t>(bins), 0.0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    counts[static_cast<size_t>(b)] += 1.0;
  }
  const double norm = values.empty() ? 0.0 : 1.0 / (static_cast<double>(values.size()) * width);
  for (int b = 0; b < bins; ++b) {
    const double d = counts[static_cast<size_t>(b)] * norm;
    s.x.push_back(lo + b * width);
    s.y.push_back(d);
    s.x.push_back(lo + (b + 1) * width);
    s.y.push_back(d);
  }
  return s;
}

}  // namespace msunet::cli
