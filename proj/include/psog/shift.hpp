#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psog/common.hpp"
#include "psog/rng.hpp"

namespace psog {

/// Planar sensor displacement in millimetres with its realized pixel
/// quantization (set by mm_to_px).
struct Shift2D {
  double dx_mm = 0.0;
  double dy_mm = 0.0;
  int realized_dx_px = 0;
  int realized_dy_px = 0;
};

/// Magnitude class of a shift, used for the out-of-training evaluation bins.
/// B1 covers magnitudes in [0, 1] mm, B2 (1, 1.5], B3 (1.5, 2], B4 > 2 mm.
enum class ShiftBin : int { B1 = 0, B2 = 1, B3 = 2, B4 = 3 };

inline constexpr int kNumShiftBins = 4;

const char* bin_label(ShiftBin bin);
ShiftBin bin_from_label(const std::string& label);

/// Source distribution for sensor-shift values: either the Gaussian model of
/// manual headset repositioning or the legacy evenly spaced rectangular grid.
struct ShiftDistribution {
  enum class Kind { Gaussian, Grid };
  Kind kind = Kind::Gaussian;
  double sigma_mm = 1.0;             // Gaussian
  double grid_range_mm = 2.0;        // Grid: values span [-range, +range]
  int grid_n_per_axis = 5;
  double max_component_mm = kMaxShiftMm;
};

/// Counts of attempted vs. accepted draws, for rejection-rate reports.
struct ShiftSampleStats {
  std::uint64_t attempts = 0;
  std::uint64_t accepted = 0;
  double rejection_rate() const {
    return attempts == 0 ? 0.0 : 1.0 - static_cast<double>(accepted) / static_cast<double>(attempts);
  }
};

/// Draws (dx, dy) independently from N(0, sigma^2); the pair is redrawn while
/// either component exceeds the workflow limit (rejection, not clamping, so
/// no probability mass piles up at the boundary).
Shift2D sample_gaussian_shift(double sigma_mm, Rng& rng,
                              double max_component_mm = kMaxShiftMm,
                              ShiftSampleStats* stats = nullptr);

/// Cartesian product of n evenly spaced values over [-range, +range] per
/// axis, endpoints included.
std::vector<Shift2D> grid_shifts(double range_mm, int n_per_axis);

/// Quantizes the mm displacement to whole pixels (round half away from zero,
/// so positive and negative shifts quantize symmetrically); mm fields are
/// preserved.
Shift2D mm_to_px(Shift2D shift, double scale_px_per_mm);

/// Rounds a single mm value to pixels with the same convention.
int round_mm_to_px(double mm, double scale_px_per_mm);

/// Classifies a shift by Euclidean magnitude sqrt(dx^2 + dy^2). A per-axis
/// maximum norm is available behind `use_max_norm`.
ShiftBin bin_shift(const Shift2D& shift, bool use_max_norm = false);

/// One shift drawn from the distribution (Gaussian: rejection sampling;
/// Grid: uniformly random grid point).
Shift2D sample_shift(const ShiftDistribution& dist, Rng& rng,
                     ShiftSampleStats* stats = nullptr);

/// Writes a shift manifest CSV (dx_mm, dy_mm, dx_px, dy_px, bin).
void write_shift_manifest(const std::string& path, const std::vector<Shift2D>& shifts,
                          const std::string& header_comment = "");

}  // namespace psog
