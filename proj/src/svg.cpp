// Copyright 2026 The kinetic-ergo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kergo/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace kergo {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  bool log;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  bool accepts(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double map(double v) const { return log ? std::log10(v) : v; }
  void widen(double v) {
    lo = std::min(lo, map(v));
    hi = std::max(hi, map(v));
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
  double frac(double v) const { return (map(v) - lo) / (hi - lo); }
  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::ceil(lo); e <= std::floor(hi) + 1e-9; e += std::max(1.0, std::floor((hi - lo) / 6.0)))
        t.push_back(std::pow(10.0, e));
      if (t.empty()) t = {std::pow(10.0, lo), std::pow(10.0, hi)};
    } else {
      const double step = std::pow(10.0, std::floor(std::log10((hi - lo) / 5.0)));
      const double s = (hi - lo) / step > 10 ? 2 * step : step;
      for (double v = std::ceil(lo / s) * s; v <= hi + 1e-9 * s; v += s) t.push_back(std::abs(v) < 1e-12 * s ? 0.0 : v);
    }
    return t;
  }
};

}  // namespace

std::string render_svg(const PlotSpec& plot) {
  Axis ax{plot.log_x}, ay{plot.log_y};
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (ax.accepts(s.x[i]) && ay.accepts(s.y[i])) ax.widen(s.x[i]), ay.widen(s.y[i]);
  ax.finish();
  ay.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + ax.frac(v) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - ay.frac(v)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
    << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : ax.ticks()) {
    const double x = px(t);
    o << "<line x1=\"" << num(x) << "\" y1=\"" << kTop << "\" x2=\"" << num(x) << "\" y2=\"" << kTop + ph
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << num(x) << "\" y=\"" << kTop + ph + 15
      << "\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double y = py(t);
    o << "<line x1=\"" << kLeft << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << num(y)
      << "\" stroke=\"#ddd\"/>\n<text x=\"" << kLeft - 6 << "\" y=\"" << num(y + 4)
      << "\" text-anchor=\"end\">" << tick_label(t) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
    << escape(plot.x_label) << "</text>\n";
  o << "<text transform=\"translate(16," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
    std::ostringstream pts;
    std::vector<std::pair<double, double>> kept;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (ax.accepts(s.x[i]) && ay.accepts(s.y[i])) kept.emplace_back(px(s.x[i]), py(s.y[i]));
    for (const auto& [x, y] : kept) pts << num(x) << ',' << num(y) << ' ';
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"5,4\"" : "")
      << " points=\"" << pts.str() << "\"/>\n";
    if (s.markers)
      for (const auto& [x, y] : kept)
        o << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
    const double ly = kTop + 14.0 + 16.0 * static_cast<double>(k);
    o << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 30 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << "/>\n";
    o << "<text x=\"" << kLeft + pw + 34 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace kergo
