#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "psog/common.hpp"
#include "psog/eye_model.hpp"
#include "psog/image.hpp"
#include "psog/shift.hpp"

namespace psog {

/// Geometry of the photosensor grid in image coordinates. Centers sit at
/// array_center + (col - (cols-1)/2, row - (rows-1)/2) * pitch; each sensor
/// integrates a window_side x window_side pixel patch around its center.
struct ArrayLayout {
  int rows = 3;
  int cols = 5;
  int window_side_px = 121;
  int pitch_px = 60;
  int array_center_x_px = 320;
  int array_center_y_px = 240;

  int sensor_count() const { return rows * cols; }
  /// Throws unless the window footprint plus the workflow shift margin fits
  /// inside the image.
  void validate(const ImageSpec& spec) const;
};

/// Normalized Gaussian receptive field over one sensor window,
/// sigma = window_side / 4.
struct ReceptiveKernel {
  int window_side = 0;
  double sigma_px = 0.0;
  std::vector<double> weights;  // row-major window_side^2, sum 1

  double at(int i, int j) const {
    return weights[static_cast<std::size_t>(i) * window_side + j];
  }
};

ReceptiveKernel receptive_kernel(int window_side_px);

/// One simulated array readout with its provenance.
struct SensorFrame {
  std::vector<double> values;  // row-major rows x cols, each in [0,1]
  Shift2D shift;
  GazeSample gaze_truth{};
  int subject_id = 0;
};

/// Total pixel offset applied to every sensor window.
struct CropOffset {
  int dx_px = 0;
  int dy_px = 0;
};

/// Combines the realized shift with (optionally compensated) head offset.
/// Throws BoundaryError when the shift exceeds the workflow limit or the
/// offset sampling region leaves the image.
CropOffset crop_offset(const ImageSpec& spec, const ArrayLayout& layout, const Shift2D& shift,
                       int head_dx_px = 0, int head_dy_px = 0, bool compensate_head = true);

/// Weighted readout of all sensors at the given offset. Kernel weights are
/// precomputed and shared; the traversal is cache-order over the patch.
SensorFrame simulate_frame(const Image& image, const ImageSpec& spec, const ArrayLayout& layout,
                           const ReceptiveKernel& kernel, const Shift2D& shift,
                           int head_dx_px = 0, int head_dy_px = 0, bool compensate_head = true);

}  // namespace psog
