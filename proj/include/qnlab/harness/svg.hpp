#ifndef QNLAB_HARNESS_SVG_HPP
#define QNLAB_HARNESS_SVG_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qnlab/harness/csv.hpp"

namespace qnlab::harness {

struct PlotStyle {
  int width = 760;
  int height = 480;
  std::string title;
  bool show_bounds = false;
};

class PlotError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  return colors[i % 7];
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
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

}  // namespace detail

/// Decade range [lo, hi] of log10(rel_gap) over the positive values.
inline std::pair<int, int> decade_range(const std::vector<TraceTable>& tables) {
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& t : tables)
    for (const auto& r : t.rows)
      if (r.rel_gap > 0) {
        const double v = std::log10(static_cast<double>(r.rel_gap));
        lo = any ? std::min(lo, v) : v;
        hi = any ? std::max(hi, v) : v;
        any = true;
      }
  if (!any) return {-1, 0};
  int a = static_cast<int>(std::floor(lo));
  int b = std::max(0, static_cast<int>(std::ceil(hi)));
  if (a == b) --a;
  return {a, b};
}

/// Log-gap-versus-iteration plot; one polyline per table, bound curves dashed.
inline std::string render_svg(const std::vector<TraceTable>& tables, const PlotStyle& style = {}) {
  if (tables.empty()) throw PlotError("plot: no tables");
  for (const auto& t : tables)
    if (t.rows.empty()) throw PlotError("plot: empty table '" + t.label() + "'");
  const auto [dlo, dhi] = decade_range(tables);
  int kmax = 1;
  for (const auto& t : tables) kmax = std::max(kmax, t.rows.back().k);

  const double left = 70, right = 190, top = style.title.empty() ? 20 : 40, bottom = 50;
  const double pw = style.width - left - right, ph = style.height - top - bottom;
  auto X = [&](double k) { return left + pw * k / kmax; };
  auto Y = [&](double lg) { return top + ph * (dhi - lg) / (dhi - dlo); };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(style.width) +
       "\" height=\"" + std::to_string(style.height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!style.title.empty())
    s += "<text x=\"" + detail::fmt(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::xml_escape(style.title) + "</text>\n";
  s += "<rect x=\"" + detail::fmt(left) + "\" y=\"" + detail::fmt(top) + "\" width=\"" + detail::fmt(pw) +
       "\" height=\"" + detail::fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  const int step = std::max(1, (dhi - dlo + 7) / 8);
  for (int e = dhi; e >= dlo; e -= step) {
    const double y = Y(e);
    s += "<line class=\"ytick\" x1=\"" + detail::fmt(left - 5) + "\" y1=\"" + detail::fmt(y) + "\" x2=\"" +
         detail::fmt(left + pw) + "\" y2=\"" + detail::fmt(y) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + detail::fmt(left - 8) + "\" y=\"" + detail::fmt(y + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">1e" + std::to_string(e) + "</text>\n";
  }
  const int xticks = 5;
  for (int i = 0; i <= xticks; ++i) {
    const double k = static_cast<double>(kmax) * i / xticks;
    s += "<text x=\"" + detail::fmt(X(k)) + "\" y=\"" + detail::fmt(top + ph + 16) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + std::to_string(static_cast<int>(std::lround(k))) + "</text>\n";
  }
  s += "<text x=\"" + detail::fmt(left + pw / 2) + "\" y=\"" + detail::fmt(style.height - 12.0) +
       "\" text-anchor=\"middle\" font-size=\"12\">iteration k</text>\n";
  s += "<text transform=\"rotate(-90)\" x=\"" + detail::fmt(-(top + ph / 2)) +
       "\" y=\"16\" text-anchor=\"middle\" font-size=\"12\">(f_k - f*) / (f_0 - f*)</text>\n";

  auto polyline = [&](const TraceTable& t, auto getter, const char* color, const char* cls, bool dashed) {
    std::string pts;
    for (const auto& r : t.rows) {
      const std::optional<Scalar> v = getter(r);
      if (!v || !(*v > 0)) continue;
      const double lg = std::max<double>(dlo, std::log10(static_cast<double>(*v)));
      pts += detail::fmt(X(r.k)) + "," + detail::fmt(Y(lg)) + " ";
    }
    if (pts.empty()) return;
    pts.pop_back();
    s += std::string("<polyline class=\"") + cls + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
         (dashed ? "1.2" : "1.8") + "\"" + (dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts + "\"/>\n";
  };

  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& t = tables[i];
    const char* color = detail::palette(i);
    polyline(t, [](const TraceRow& r) { return std::optional<Scalar>(r.rel_gap); }, color, "trace", false);
    if (style.show_bounds) {
      polyline(t, [](const TraceRow& r) { return r.bound_thm1; }, color, "bound", true);
      polyline(t, [](const TraceRow& r) { return r.bound_thm2; }, color, "bound", true);
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(i);
    const double lx = left + pw + 12;
    s += "<line x1=\"" + detail::fmt(lx) + "\" y1=\"" + detail::fmt(ly) + "\" x2=\"" + detail::fmt(lx + 24) +
         "\" y2=\"" + detail::fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"1.8\"/>\n";
    s += "<text class=\"legend\" x=\"" + detail::fmt(lx + 30) + "\" y=\"" + detail::fmt(ly + 4) +
         "\" font-size=\"11\">" + detail::xml_escape(t.label()) + "</text>\n";
  }
  if (style.show_bounds) {
    const double ly = top + 14 + 18.0 * static_cast<double>(tables.size());
    const double lx = left + pw + 12;
    s += "<line x1=\"" + detail::fmt(lx) + "\" y1=\"" + detail::fmt(ly) + "\" x2=\"" + detail::fmt(lx + 24) +
         "\" y2=\"" + detail::fmt(ly) + "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    s += "<text class=\"legend\" x=\"" + detail::fmt(lx + 30) + "\" y=\"" + detail::fmt(ly + 4) +
         "\" font-size=\"11\">rate bounds</text>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void emit_svg_plot(const std::vector<TraceTable>& tables, const std::filesystem::path& path,
                          const PlotStyle& style = {}) {
  const std::string text = render_svg(tables, style);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlotError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw PlotError("write failed for '" + path.string() + "'");
}

}  // namespace qnlab::harness

#endif  // QNLAB_HARNESS_SVG_HPP
