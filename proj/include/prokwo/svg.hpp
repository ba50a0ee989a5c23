#pragma once

// Minimal static SVG charts. Styling is deliberately plain; every plotted
// value is also written verbatim into data-* attributes so a figure can be
// checked against the CSV it was drawn from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prokwo/csv.hpp"

namespace prokwo::svg {

namespace detail {

inline std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

inline std::string value(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string("NA"); }

// Diverging blue-white-red ramp over r in [-1, 1].
inline std::string diverging_color(double r) {
  r = std::clamp(r, -1.0, 1.0);
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(r))));
  std::ostringstream s;
  if (r >= 0) {
    s << "rgb(255," << fade << ',' << fade << ')';
  } else {
    s << "rgb(" << fade << ',' << fade << ",255)";
  }
  return s.str();
}

inline const char* palette(std::size_t i) {
  static constexpr const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  return colors[i % std::size(colors)];
}

inline std::string header(int width, int height, const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
    << width << ' ' << height << "\">\n"
    << "<title>" << escape(title) << "</title>\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
    << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  return s.str();
}

}  // namespace detail

struct Cell {
  std::string row;
  std::string column;
  std::optional<double> r;
  std::optional<double> p;
  std::size_t n = 0;
};

// Lower-triangular correlogram. `labels` fixes the row/column order.
inline std::string correlogram(const std::string& title, const std::vector<std::string>& labels,
                               const std::vector<Cell>& cells) {
  const int cell = 90, left = 150, top = 40;
  const int size = static_cast<int>(labels.size());
  std::ostringstream s;
  s << detail::header(left + cell * size + 20, top + cell * size + 40, title);
  for (int i = 0; i < size; ++i) {
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + cell * i + cell / 2 << "\" text-anchor=\"end\" font-size=\"11\">"
      << detail::escape(labels[static_cast<std::size_t>(i)]) << "</text>\n";
    s << "<text x=\"" << left + cell * i + cell / 2 << "\" y=\"" << top + cell * size + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::escape(labels[static_cast<std::size_t>(i)])
      << "</text>\n";
  }
  for (const auto& c : cells) {
    const auto row = std::find(labels.begin(), labels.end(), c.row) - labels.begin();
    const auto col = std::find(labels.begin(), labels.end(), c.column) - labels.begin();
    if (row >= size || col >= size) continue;
    const int x = left + cell * static_cast<int>(col);
    const int y = top + cell * static_cast<int>(row);
    s << "<rect class=\"cell\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
      << "\" fill=\"" << (c.r ? detail::diverging_color(*c.r) : std::string("#dddddd")) << "\" stroke=\"#999999\""
      << " data-row=\"" << detail::escape(c.row) << "\" data-column=\"" << detail::escape(c.column) << "\" data-r=\""
      << detail::value(c.r) << "\" data-p=\"" << detail::value(c.p) << "\" data-n=\"" << c.n << "\"/>\n";
    s << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << (c.r ? detail::num(std::round(*c.r * 100.0) / 100.0) : std::string("NA")) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

struct Point {
  double x = 0.0;
  std::optional<double> y;
  std::optional<double> low;  // optional interval
  std::optional<double> high;
};

struct Series {
  std::string name;
  std::vector<Point> points;
};

// Line chart with one polyline per series; missing points break nothing, they
// are skipped in the polyline and emitted with data-value="NA".
inline std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<Series>& series) {
  const int width = 640, height = 420, left = 70, right = 170, top = 40, bottom = 50;
  double x_min = HUGE_VAL, x_max = -HUGE_VAL, y_min = 0.0, y_max = 0.0;
  for (const auto& se : series) {
    for (const auto& pt : se.points) {
      x_min = std::min(x_min, pt.x);
      x_max = std::max(x_max, pt.x);
      for (const auto& v : {pt.y, pt.low, pt.high}) {
        if (v) {
          y_min = std::min(y_min, *v);
          y_max = std::max(y_max, *v);
        }
      }
    }
  }
  if (!(x_max > x_min)) {
    x_min -= 1.0;
    x_max += 1.0;
  }
  if (!(y_max > y_min)) y_max = y_min + 1.0;
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };

  std::ostringstream s;
  s << detail::header(width, height, title);
  s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  if (y_min < 0.0 && y_max > 0.0) {
    s << "<line x1=\"" << left << "\" y1=\"" << detail::num(sy(0.0)) << "\" x2=\"" << left + plot_w << "\" y2=\""
      << detail::num(sy(0.0)) << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
  }
  s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << detail::escape(x_label) << "</text>\n";
  s << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << top + plot_h / 2 << ")\">" << detail::escape(y_label) << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = y_min + (y_max - y_min) * t / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << detail::num(sy(y) + 4) << "\" text-anchor=\"end\" font-size=\"10\">"
      << detail::num(std::round(y * 100.0) / 100.0) << "</text>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& se = series[k];
    const char* color = detail::palette(k);
    s << "<g class=\"series\" data-series=\"" << detail::escape(se.name) << "\">\n";
    std::string path;
    for (const auto& pt : se.points) {
      if (!pt.y) continue;
      path += (path.empty() ? "" : " ") + detail::num(sx(pt.x)) + ',' + detail::num(sy(*pt.y));
    }
    if (!path.empty()) s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << path << "\"/>\n";
    for (const auto& pt : se.points) {
      if (pt.y && pt.low && pt.high) {
        s << "<line x1=\"" << detail::num(sx(pt.x)) << "\" y1=\"" << detail::num(sy(*pt.low)) << "\" x2=\""
          << detail::num(sx(pt.x)) << "\" y2=\"" << detail::num(sy(*pt.high)) << "\" stroke=\"" << color << "\"/>\n";
      }
      s << "<circle class=\"point\" cx=\"" << detail::num(sx(pt.x)) << "\" cy=\""
        << (pt.y ? detail::num(sy(*pt.y)) : detail::num(top + plot_h)) << "\" r=\"" << (pt.y ? 4 : 0) << "\" fill=\""
        << color << "\" data-series=\"" << detail::escape(se.name) << "\" data-x=\"" << csv::format_double(pt.x)
        << "\" data-value=\"" << detail::value(pt.y) << '"';
      if (pt.low) s << " data-low=\"" << detail::value(pt.low) << '"';
      if (pt.high) s << " data-high=\"" << detail::value(pt.high) << '"';
      s << "/>\n";
    }
    s << "<text x=\"" << left + plot_w + 12 << "\" y=\"" << top + 16 * static_cast<int>(k) + 10
      << "\" font-size=\"11\" fill=\"" << color << "\">" << detail::escape(se.name) << "</text>\n";
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

struct ScatterPoint {
  std::string label;
  std::string group;
  double x = 0.0;
  double y = 0.0;
};

inline std::string scatter(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ScatterPoint>& points, const std::vector<std::string>& groups) {
  const int width = 640, height = 440, left = 70, right = 150, top = 40, bottom = 50;
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 0.0;
  for (const auto& pt : points) {
    x_min = std::min(x_min, pt.x);
    x_max = std::max(x_max, pt.x);
    y_min = std::min(y_min, pt.y);
    y_max = std::max(y_max, pt.y);
  }
  if (!(y_max > y_min)) y_max = y_min + 1.0;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };
  std::ostringstream s;
  s << detail::header(width, height, title);
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  s << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << detail::escape(x_label) << "</text>\n";
  s << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << top + plot_h / 2 << ")\">" << detail::escape(y_label) << "</text>\n";
  for (const auto& pt : points) {
    const auto g = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), pt.group) - groups.begin());
    s << "<circle class=\"point\" cx=\"" << detail::num(sx(pt.x)) << "\" cy=\"" << detail::num(sy(pt.y))
      << "\" r=\"3\" fill=\"" << detail::palette(g) << "\" data-label=\"" << detail::escape(pt.label) << "\" data-group=\""
      << detail::escape(pt.group) << "\" data-x=\"" << csv::format_double(pt.x) << "\" data-y=\""
      << csv::format_double(pt.y) << "\"/>\n";
  }
  for (std::size_t k = 0; k < groups.size(); ++k) {
    s << "<text x=\"" << left + plot_w + 12 << "\" y=\"" << top + 16 * static_cast<int>(k) + 10
      << "\" font-size=\"11\" fill=\"" << detail::palette(k) << "\">" << detail::escape(groups[k]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace prokwo::svg
