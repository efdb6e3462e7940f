#include "psog/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "psog/common.hpp"

namespace psog {
namespace {

constexpr const char* kPalette[] = {"#1f6feb", "#d1242f", "#1a7f37", "#9a6700",
                                    "#8250df", "#bf3989"};
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 16;
constexpr int kMarginTop = 36;
constexpr int kMarginBottom = 48;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Tick spacing as 1/2/5 times a power of ten close to range/target.
double nice_step(double range, int target_ticks) {
  double rough = range / std::max(target_ticks, 1);
  double mag = std::pow(10.0, std::floor(std::log10(rough)));
  double norm = rough / mag;
  double factor = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0;
  return factor * mag;
}

}  // namespace

void write_svg_plot(const std::string& path, const PlotSpec& spec,
                    const std::string& header_comment) {
  if (spec.series.empty()) throw ConfigError("plot needs at least one series");
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  bool first = true;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size()) throw ConfigError("series x/y length mismatch");
    if (!s.yerr.empty() && s.yerr.size() != s.y.size())
      throw ConfigError("series yerr length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double e = s.yerr.empty() ? 0.0 : s.yerr[i];
      if (first) {
        x_min = x_max = s.x[i];
        y_min = s.y[i] - e;
        y_max = s.y[i] + e;
        first = false;
      } else {
        x_min = std::min(x_min, s.x[i]);
        x_max = std::max(x_max, s.x[i]);
        y_min = std::min(y_min, s.y[i] - e);
        y_max = std::max(y_max, s.y[i] + e);
      }
    }
  }
  if (first) throw ConfigError("plot series are all empty");
  if (x_max == x_min) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_max == y_min) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  double plot_w = spec.width - kMarginLeft - kMarginRight;
  double plot_h = spec.height - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return kMarginTop + (y_max - y) / (y_max - y_min) * plot_h; };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  if (!header_comment.empty()) out << "<!-- " << header_comment << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
      << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << spec.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << spec.title << "</text>\n";

  // Axes and gridlines.
  out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  double xs = nice_step(x_max - x_min, 6);
  for (double t = std::ceil(x_min / xs) * xs; t <= x_max + 1e-12 * xs; t += xs) {
    out << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << fmt(px(t)) << "\" y2=\"" << kMarginTop + plot_h + 4 << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << fmt(px(t)) << "\" y=\"" << kMarginTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
        << "</text>\n";
  }
  double ys = nice_step(y_max - y_min, 5);
  for (double t = std::ceil(y_min / ys) * ys; t <= y_max + 1e-12 * ys; t += ys) {
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << fmt(py(t)) << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << fmt(py(t))
        << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
    out << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << fmt(py(t) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
        << "</text>\n";
  }
  out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << spec.height - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << spec.x_label
      << "</text>\n";
  out << "<text x=\"14\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 14 " << kMarginTop + plot_h / 2 << ")\">" << spec.y_label
      << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (!s.yerr.empty()) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        double x = px(s.x[i]);
        double lo = py(s.y[i] - s.yerr[i]);
        double hi = py(s.y[i] + s.yerr[i]);
        out << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(lo) << "\" x2=\"" << fmt(x)
            << "\" y2=\"" << fmt(hi) << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
        for (double e : {lo, hi}) {
          out << "<line x1=\"" << fmt(x - 3) << "\" y1=\"" << fmt(e) << "\" x2=\"" << fmt(x + 3)
              << "\" y2=\"" << fmt(e) << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
        }
      }
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << (i + 1 == s.x.size() ? "" : " ");
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    // Legend entry.
    double ly = kMarginTop + 14 + 16.0 * static_cast<double>(si);
    out << "<line x1=\"" << kMarginLeft + plot_w - 110 << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
        << kMarginLeft + plot_w - 92 << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kMarginLeft + plot_w - 86 << "\" y=\"" << fmt(ly)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace psog
