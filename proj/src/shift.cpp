#include "psog/shift.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace psog {

const char* bin_label(ShiftBin bin) {
  switch (bin) {
    case ShiftBin::B1: return "B1";
    case ShiftBin::B2: return "B2";
    case ShiftBin::B3: return "B3";
    case ShiftBin::B4: return "B4";
  }
  throw std::logic_error("bin_label: bad enum value");
}

ShiftBin bin_from_label(const std::string& label) {
  if (label == "B1") return ShiftBin::B1;
  if (label == "B2") return ShiftBin::B2;
  if (label == "B3") return ShiftBin::B3;
  if (label == "B4") return ShiftBin::B4;
  throw ConfigError("unknown shift bin label: " + label);
}

Shift2D sample_gaussian_shift(double sigma_mm, Rng& rng, double max_component_mm,
                              ShiftSampleStats* stats) {
  if (sigma_mm <= 0.0) throw ConfigError("shift sigma must be positive");
  if (max_component_mm <= 0.0) throw ConfigError("shift component limit must be positive");
  for (;;) {
    double dx = rng.normal(0.0, sigma_mm);
    double dy = rng.normal(0.0, sigma_mm);
    if (stats != nullptr) ++stats->attempts;
    if (std::abs(dx) <= max_component_mm && std::abs(dy) <= max_component_mm) {
      if (stats != nullptr) ++stats->accepted;
      Shift2D s;
      s.dx_mm = dx;
      s.dy_mm = dy;
      return s;
    }
  }
}

std::vector<Shift2D> grid_shifts(double range_mm, int n_per_axis) {
  if (n_per_axis < 1) throw ConfigError("grid needs at least one point per axis");
  if (range_mm < 0.0) throw ConfigError("grid range must be non-negative");
  std::vector<double> axis(static_cast<std::size_t>(n_per_axis));
  if (n_per_axis == 1) {
    axis[0] = 0.0;
  } else {
    // v_i = range * (2i/(n-1) - 1) hits both endpoints exactly and 0 when
    // n is odd.
    for (int i = 0; i < n_per_axis; ++i) {
      axis[static_cast<std::size_t>(i)] =
          range_mm * (2.0 * i / (n_per_axis - 1) - 1.0);
    }
  }
  std::vector<Shift2D> out;
  out.reserve(axis.size() * axis.size());
  for (double dy : axis) {
    for (double dx : axis) {
      Shift2D s;
      s.dx_mm = dx;
      s.dy_mm = dy;
      out.push_back(s);
    }
  }
  return out;
}

int round_mm_to_px(double mm, double scale_px_per_mm) {
  if (scale_px_per_mm <= 0.0) throw ConfigError("scale must be positive");
  return static_cast<int>(std::lround(mm * scale_px_per_mm));
}

Shift2D mm_to_px(Shift2D shift, double scale_px_per_mm) {
  shift.realized_dx_px = round_mm_to_px(shift.dx_mm, scale_px_per_mm);
  shift.realized_dy_px = round_mm_to_px(shift.dy_mm, scale_px_per_mm);
  return shift;
}

ShiftBin bin_shift(const Shift2D& shift, bool use_max_norm) {
  double m = use_max_norm ? std::max(std::abs(shift.dx_mm), std::abs(shift.dy_mm))
                          : std::hypot(shift.dx_mm, shift.dy_mm);
  if (m <= 1.0) return ShiftBin::B1;
  if (m <= 1.5) return ShiftBin::B2;
  if (m <= 2.0) return ShiftBin::B3;
  return ShiftBin::B4;
}

Shift2D sample_shift(const ShiftDistribution& dist, Rng& rng, ShiftSampleStats* stats) {
  if (dist.kind == ShiftDistribution::Kind::Gaussian) {
    return sample_gaussian_shift(dist.sigma_mm, rng, dist.max_component_mm, stats);
  }
  auto grid = grid_shifts(dist.grid_range_mm, dist.grid_n_per_axis);
  auto idx = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(grid.size()) - 1));
  if (stats != nullptr) {
    ++stats->attempts;
    ++stats->accepted;
  }
  return grid[idx];
}

void write_shift_manifest(const std::string& path, const std::vector<Shift2D>& shifts,
                          const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "dx_mm,dy_mm,dx_px,dy_px,bin\n";
  char buf[128];
  for (const auto& s : shifts) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%d,%s\n", s.dx_mm, s.dy_mm,
                  s.realized_dx_px, s.realized_dy_px, bin_label(bin_shift(s)));
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace psog
