#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psog/common.hpp"
#include "psog/shift.hpp"

namespace psog {

/// Mean Euclidean gaze error in degrees (small-angle planar convention).
/// This is the single definition every reported number flows through.
double spatial_accuracy(const std::vector<GazeSample>& predictions,
                        const std::vector<GazeSample>& truths);

/// Per-cell error statistics over a grid tiling the gaze operating range.
/// Samples are assigned by true gaze; out-of-range samples clamp to the edge
/// cells so counts always sum to N.
struct SpatialAccuracyMap {
  int grid_rows = 0;
  int grid_cols = 0;
  double range_x_deg = 0.0;
  double range_y_deg = 0.0;
  std::vector<double> mean;    // row-major; 0 for empty cells
  std::vector<double> stddev;  // population std; 0 for empty cells
  std::vector<std::size_t> count;

  bool cell_empty(int r, int c) const {
    return count[static_cast<std::size_t>(r * grid_cols + c)] == 0;
  }
};

SpatialAccuracyMap accuracy_map(const std::vector<GazeSample>& predictions,
                                const std::vector<GazeSample>& truths, int grid_rows = 4,
                                int grid_cols = 4, double range_x_deg = kOperatingRangeXDeg,
                                double range_y_deg = kOperatingRangeYDeg);

/// Text grid of "mean +- std (n)" cells, top row first.
std::string format_accuracy_map(const SpatialAccuracyMap& map);

/// Per-shift-bin accuracy; bins with no samples are absent, not zero.
struct BinAccuracy {
  std::array<std::optional<double>, kNumShiftBins> mean;
  std::array<std::size_t, kNumShiftBins> count{};

  /// Degradation of a bin relative to the B1 benchmark.
  std::optional<double> delta_vs_b1(ShiftBin bin) const;
};

BinAccuracy accuracy_by_shift_bin(const std::vector<GazeSample>& predictions,
                                  const std::vector<GazeSample>& truths,
                                  const std::vector<Shift2D>& shifts);

/// 100 * (comparison - baseline) / baseline, in percent.
double relative_change(double baseline_deg, double comparison_deg);

/// Aggregate view: overall, per shift bin, and per subject.
struct AccuracyReport {
  double overall = 0.0;
  BinAccuracy by_bin;
  std::map<int, double> per_subject;
};

AccuracyReport build_report(const std::vector<GazeSample>& predictions,
                            const std::vector<GazeSample>& truths,
                            const std::vector<Shift2D>& shifts,
                            const std::vector<int>& subject_ids);

}  // namespace psog
