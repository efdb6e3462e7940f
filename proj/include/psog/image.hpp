#pragma once

#include <cstddef>
#include <vector>

namespace psog {

/// Row-major grayscale image with intensities nominally in [0, 1]. Pixels are
/// doubles: sensor values are convex combinations of pixels and downstream
/// tolerances are tighter than float precision.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pix;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pix(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int y, int x) { return pix[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return pix[static_cast<std::size_t>(y) * width + x]; }
  bool in_bounds(int y, int x) const { return y >= 0 && y < height && x >= 0 && x < width; }
};

}  // namespace psog
