#pragma once

#include <stdexcept>

namespace psog {

// Operating range of the stimulus, degrees of visual angle (half-extent).
inline constexpr double kOperatingRangeXDeg = 20.51;
inline constexpr double kOperatingRangeYDeg = 16.7;

// Sensor shifts beyond this per-axis limit push sampled windows outside the
// guaranteed image margin; the simulation workflow rejects them.
inline constexpr double kMaxShiftMm = 5.0;

/// A gaze direction in degrees of visual angle.
struct GazeSample {
  double x_deg = 0.0;
  double y_deg = 0.0;
};

/// Invalid configuration values (sizes, fractions, ranges).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A crop would sample outside the image or the guaranteed shift margin.
class BoundaryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pre-training pool contains records of the target subject.
class LeakageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training produced non-finite losses or gradients.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace psog
