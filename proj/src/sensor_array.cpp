#include "psog/sensor_array.hpp"

#include <cmath>
#include <string>

namespace psog {

namespace {

// Center of sensor index k (0-based) along an axis of n sensors, relative to
// the array center. Matches the readout loop exactly, including the integer
// truncation for even n.
int sensor_center_offset(int k, int n, int pitch) { return (k - (n - 1) / 2) * pitch; }

}  // namespace

void ArrayLayout::validate(const ImageSpec& spec) const {
  spec.validate();
  if (rows < 1 || cols < 1) throw ConfigError("sensor grid must be at least 1x1");
  if (pitch_px <= 0) throw ConfigError("sensor pitch must be positive");
  if (window_side_px < 1 || window_side_px % 2 == 0)
    throw ConfigError("sensor window side must be odd and positive");
  int half = window_side_px / 2;
  int lo_x = sensor_center_offset(0, cols, pitch_px);
  int hi_x = sensor_center_offset(cols - 1, cols, pitch_px);
  int lo_y = sensor_center_offset(0, rows, pitch_px);
  int hi_y = sensor_center_offset(rows - 1, rows, pitch_px);
  int margin = round_mm_to_px(kMaxShiftMm, spec.scale_px_per_mm);
  if (array_center_x_px + lo_x - half - margin < 0 ||
      array_center_x_px + hi_x + half + margin > spec.width - 1 ||
      array_center_y_px + lo_y - half - margin < 0 ||
      array_center_y_px + hi_y + half + margin > spec.height - 1) {
    throw ConfigError("sensor footprint plus shift margin does not fit in the image");
  }
}

ReceptiveKernel receptive_kernel(int window_side_px) {
  if (window_side_px < 1 || window_side_px % 2 == 0)
    throw ConfigError("receptive kernel window side must be odd and positive");
  ReceptiveKernel k;
  k.window_side = window_side_px;
  k.sigma_px = window_side_px / 4.0;
  k.weights.resize(static_cast<std::size_t>(window_side_px) * window_side_px);
  int half = window_side_px / 2;
  double inv2s2 = 1.0 / (2.0 * k.sigma_px * k.sigma_px);
  // Kahan-compensated total so normalization error stays near machine eps
  // even for large windows.
  double sum = 0.0, comp = 0.0;
  for (int i = 0; i < window_side_px; ++i) {
    double di = i - half;
    for (int j = 0; j < window_side_px; ++j) {
      double dj = j - half;
      double w = std::exp(-(di * di + dj * dj) * inv2s2);
      k.weights[static_cast<std::size_t>(i) * window_side_px + j] = w;
      double y = w - comp;
      double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
  }
  for (double& w : k.weights) w /= sum;
  return k;
}

CropOffset crop_offset(const ImageSpec& spec, const ArrayLayout& layout, const Shift2D& shift,
                       int head_dx_px, int head_dy_px, bool compensate_head) {
  layout.validate(spec);
  if (std::abs(shift.dx_mm) > kMaxShiftMm || std::abs(shift.dy_mm) > kMaxShiftMm) {
    throw BoundaryError("sensor shift exceeds the supported displacement range");
  }
  CropOffset off;
  off.dx_px = shift.realized_dx_px + (compensate_head ? head_dx_px : 0);
  off.dy_px = shift.realized_dy_px + (compensate_head ? head_dy_px : 0);

  int half = layout.window_side_px / 2;
  int min_x = layout.array_center_x_px + sensor_center_offset(0, layout.cols, layout.pitch_px) -
              half + off.dx_px;
  int max_x = layout.array_center_x_px +
              sensor_center_offset(layout.cols - 1, layout.cols, layout.pitch_px) + half +
              off.dx_px;
  int min_y = layout.array_center_y_px + sensor_center_offset(0, layout.rows, layout.pitch_px) -
              half + off.dy_px;
  int max_y = layout.array_center_y_px +
              sensor_center_offset(layout.rows - 1, layout.rows, layout.pitch_px) + half +
              off.dy_px;
  if (min_x < 0 || max_x > spec.width - 1 || min_y < 0 || max_y > spec.height - 1) {
    throw BoundaryError("offset sensor windows leave the image bounds");
  }
  return off;
}

SensorFrame simulate_frame(const Image& image, const ImageSpec& spec, const ArrayLayout& layout,
                           const ReceptiveKernel& kernel, const Shift2D& shift,
                           int head_dx_px, int head_dy_px, bool compensate_head) {
  if (image.width != spec.width || image.height != spec.height)
    throw ConfigError("image does not match its spec");
  if (kernel.window_side != layout.window_side_px)
    throw ConfigError("kernel window does not match the layout window");
  CropOffset off = crop_offset(spec, layout, shift, head_dx_px, head_dy_px, compensate_head);

  SensorFrame frame;
  frame.values.assign(static_cast<std::size_t>(layout.sensor_count()), 0.0);
  frame.shift = shift;

  int half = layout.window_side_px / 2;
  int side = layout.window_side_px;
  for (int r = 0; r < layout.rows; ++r) {
    int cy = layout.array_center_y_px + sensor_center_offset(r, layout.rows, layout.pitch_px) +
             off.dy_px;
    for (int c = 0; c < layout.cols; ++c) {
      int cx = layout.array_center_x_px + sensor_center_offset(c, layout.cols, layout.pitch_px) +
               off.dx_px;
      double acc = 0.0;
      const double* wrow = kernel.weights.data();
      for (int i = 0; i < side; ++i) {
        const double* prow = &image.pix[static_cast<std::size_t>(cy - half + i) * image.width +
                                        (cx - half)];
        double row_acc = 0.0;
        for (int j = 0; j < side; ++j) row_acc += wrow[j] * prow[j];
        acc += row_acc;
        wrow += side;
      }
      frame.values[static_cast<std::size_t>(r) * layout.cols + c] = acc;
    }
  }
  return frame;
}

}  // namespace psog
