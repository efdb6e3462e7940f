#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "psog/image.hpp"
#include "psog/network.hpp"
#include "psog/sensor_array.hpp"

namespace psog {

// Slow, obviously-correct counterparts of the production kernels. They share
// only type definitions and the flat parameter layout with the fast paths;
// the arithmetic is reimplemented from scratch so tests and benchmarks can
// compare the two.

/// Naive per-sensor readout: recomputes the unnormalized Gaussian weight for
/// every pixel and divides by the accumulated weight total, instead of using
/// a precomputed normalized kernel.
SensorFrame ref_simulate_frame(const Image& image, const ImageSpec& spec,
                               const ArrayLayout& layout, const Shift2D& shift,
                               int head_dx_px = 0, int head_dy_px = 0,
                               bool compensate_head = true);

/// Textbook layer-by-layer forward pass over explicitly zero-padded feature
/// maps; allocates everything per call.
std::array<double, nn::kOut> ref_forward(const std::vector<double>& params, const double* input);

/// Central finite differences of the mean batch loss wrt every parameter.
/// Uses forward evaluation only, never the analytic backward pass.
std::vector<double> fd_gradient(const std::vector<double>& params,
                                const std::vector<double>& inputs,
                                const std::vector<double>& targets,
                                const std::vector<std::size_t>& rows, double step);

/// P(|X| <= limit) for X ~ N(0, sigma^2), via the error function.
double normal_abs_le_fraction(double limit, double sigma);

}  // namespace psog
