#pragma once

#include <string>
#include <vector>

namespace psog {

/// One plotted line; yerr, when non-empty, draws symmetric error bars.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y, yerr;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  std::vector<PlotSeries> series;
  int width = 720;
  int height = 480;
};

/// Standalone vector plot (line + error bars + legend); output depends only
/// on the PlotSpec, so reruns are byte-identical.
void write_svg_plot(const std::string& path, const PlotSpec& spec,
                    const std::string& header_comment = "");

}  // namespace psog
