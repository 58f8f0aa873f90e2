#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "specrecon/detail/text.hpp"
#include "specrecon/error.hpp"

namespace specrecon {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

enum class PlotKind { SpectrumOverlay, ErrorVsC, DensityOverlay };

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  /// Log scale on both axes. error_vs_c always uses it.
  bool log_log = false;
};

/// Least-squares slope of log y against log x over the points where both are positive.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorKind::SizeMismatch, "slope needs equal-length columns");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) continue;
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "slope needs two positive points");
  const double nn = static_cast<double>(n);
  const double den = nn * sxx - sx * sx;
  if (den == 0.0) throw Error(ErrorKind::InvalidArgument, "slope needs two distinct x values");
  return (nn * sxy - sx * sy) / den;
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string svg_num(double v) { return format_fixed(v, 2); }

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double map(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double t = log ? std::log10(v) : v;
    return b == a ? 0.5 : (t - a) / (b - a);
  }
};

inline Axis fit_axis(const std::vector<const std::vector<double>*>& cols, bool log) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* col : cols) {
    for (double v : *col) {
      if (!std::isfinite(v) || (log && !(v > 0.0))) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) {
    lo = log ? 1.0 : 0.0;
    hi = log ? 10.0 : 1.0;
  }
  if (lo == hi) {
    if (log) {
      lo /= 2.0;
      hi *= 2.0;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  if (!log) {
    const double pad = 0.04 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return {lo, hi, log};
}

inline const char* palette(std::size_t k) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[k % 6];
}

}  // namespace detail

/// Standalone SVG text. Same inputs give the same bytes.
inline std::string render_svg(const std::vector<Series>& series, PlotKind kind, const PlotOptions& opt = {}) {
  using detail::svg_num;
  if (series.empty()) throw Error(ErrorKind::EmptySeries, "plot needs at least one series");
  for (const auto& s : series) {
    if (s.x.empty()) throw Error(ErrorKind::EmptySeries, "series '" + s.name + "' is empty");
    if (s.x.size() != s.y.size()) throw Error(ErrorKind::SizeMismatch, "series '" + s.name + "' has x/y mismatch");
  }
  const bool log = opt.log_log || kind == PlotKind::ErrorVsC;
  std::vector<const std::vector<double>*> xs, ys;
  for (const auto& s : series) {
    xs.push_back(&s.x);
    ys.push_back(&s.y);
  }
  const auto ax = detail::fit_axis(xs, log);
  const auto ay = detail::fit_axis(ys, log);

  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  const double pw = W - L - R;
  const double ph = H - T - B;
  const auto px = [&](double v) { return L + ax.map(v) * pw; };
  const auto py = [&](double v) { return T + (1.0 - ay.map(v)) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  if (!opt.title.empty()) {
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << detail::xml_escape(opt.title) << "</text>\n";
  }
  os << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph << "\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\"/>\n";
  os << "</g>\n";

  // Five ticks per axis, evenly spaced in the plotted coordinate.
  os << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double t = k / 4.0;
    const auto value_at = [&](const detail::Axis& a) {
      return a.log ? std::pow(10.0, std::log10(a.lo) + t * (std::log10(a.hi) - std::log10(a.lo)))
                   : a.lo + t * (a.hi - a.lo);
    };
    const double xv = value_at(ax);
    const double yv = value_at(ay);
    const double X = L + t * pw;
    const double Y = T + (1.0 - t) * ph;
    os << "<line x1=\"" << svg_num(X) << "\" y1=\"" << T + ph << "\" x2=\"" << svg_num(X) << "\" y2=\"" << T + ph + 4
       << "\" stroke=\"black\"/>";
    os << "<text x=\"" << svg_num(X) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">"
       << detail::format_double(xv, 3) << "</text>\n";
    os << "<line x1=\"" << L - 4 << "\" y1=\"" << svg_num(Y) << "\" x2=\"" << L << "\" y2=\"" << svg_num(Y)
       << "\" stroke=\"black\"/>";
    os << "<text x=\"" << L - 6 << "\" y=\"" << svg_num(Y + 3) << "\" text-anchor=\"end\">"
       << detail::format_double(yv, 3) << "</text>\n";
  }
  os << "</g>\n";
  if (!opt.x_label.empty()) {
    os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(opt.x_label)
       << "</text>\n";
  }
  if (!opt.y_label.empty()) {
    os << "<text x=\"14\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"12\" transform=\"rotate(-90 14 " << T + ph / 2 << ")\">" << detail::xml_escape(opt.y_label)
       << "</text>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline class=\"series\" data-name=\"" << detail::xml_escape(s.name) << "\" fill=\"none\" stroke=\""
       << detail::palette(k) << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if (!std::isfinite(s.x[j]) || !std::isfinite(s.y[j])) continue;
      if (log && (!(s.x[j] > 0.0) || !(s.y[j] > 0.0))) continue;
      os << (first ? "" : " ") << svg_num(px(s.x[j])) << ',' << svg_num(py(s.y[j]));
      first = false;
    }
    os << "\"/>\n";
    if (kind == PlotKind::ErrorVsC) {
      for (std::size_t j = 0; j < s.x.size(); ++j) {
        if (!(s.x[j] > 0.0) || !(s.y[j] > 0.0)) continue;
        os << "<circle cx=\"" << svg_num(px(s.x[j])) << "\" cy=\"" << svg_num(py(s.y[j])) << "\" r=\"3\" fill=\""
           << detail::palette(k) << "\"/>\n";
      }
    }
  }

  os << "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = T + 12 + 16.0 * static_cast<double>(k);
    os << "<line x1=\"" << L + pw - 150 << "\" y1=\"" << y - 4 << "\" x2=\"" << L + pw - 130 << "\" y2=\"" << y - 4
       << "\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"2\"/>";
    os << "<text x=\"" << L + pw - 125 << "\" y=\"" << y << "\">" << detail::xml_escape(series[k].name)
       << "</text>\n";
  }
  os << "</g>\n";

  if (kind == PlotKind::ErrorVsC) {
    std::string annotation;
    try {
      annotation = "slope = " + detail::format_fixed(loglog_slope(series[0].x, series[0].y), 3);
    } catch (const Error&) {
      annotation = "slope = n/a";
    }
    os << "<text class=\"slope\" x=\"" << L + 10 << "\" y=\"" << T + ph - 10
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << annotation << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void emit_plot(const std::vector<Series>& series, PlotKind kind, const std::string& path,
                      const PlotOptions& opt = {}) {
  const auto text = render_svg(series, kind, opt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

}  // namespace specrecon
