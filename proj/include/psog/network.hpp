#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "psog/common.hpp"
#include "psog/rng.hpp"

namespace psog::nn {

// Fixed architecture: 1x3x5 input -> two 3x3 same-padded rectified conv
// layers of 4 channels -> flatten (60) -> four rectified FC layers of 20 ->
// linear head of 2 (gaze x, y in degrees).
inline constexpr int kInRows = 3;
inline constexpr int kInCols = 5;
inline constexpr int kInSize = kInRows * kInCols;  // 15
inline constexpr int kChannels = 4;
inline constexpr int kKernel = 3;
inline constexpr int kFeat = kChannels * kInSize;  // 60
inline constexpr int kFcWidth = 20;
inline constexpr int kFcLayers = 4;
inline constexpr int kOut = 2;

/// Flat parameter vector offsets, in forward order. Weight layouts are
/// row-major: conv w[oc][ic][ki][kj], fc/head w[out][in].
struct Layout {
  static constexpr int conv1_w = 0;
  static constexpr int conv1_b = conv1_w + kChannels * 1 * kKernel * kKernel;
  static constexpr int conv2_w = conv1_b + kChannels;
  static constexpr int conv2_b = conv2_w + kChannels * kChannels * kKernel * kKernel;
  static constexpr int fc1_w = conv2_b + kChannels;
  static constexpr int fc1_b = fc1_w + kFcWidth * kFeat;
  static constexpr int fc2_w = fc1_b + kFcWidth;
  static constexpr int fc2_b = fc2_w + kFcWidth * kFcWidth;
  static constexpr int fc3_w = fc2_b + kFcWidth;
  static constexpr int fc3_b = fc3_w + kFcWidth * kFcWidth;
  static constexpr int fc4_w = fc3_b + kFcWidth;
  static constexpr int fc4_b = fc4_w + kFcWidth * kFcWidth;
  static constexpr int head_w = fc4_b + kFcWidth;
  static constexpr int head_b = head_w + kOut * kFcWidth;
  static constexpr int total = head_b + kOut;
};

inline constexpr int kParamCount = Layout::total;

inline constexpr std::array<int, kFcLayers> kFcWOff = {Layout::fc1_w, Layout::fc2_w,
                                                       Layout::fc3_w, Layout::fc4_w};
inline constexpr std::array<int, kFcLayers> kFcBOff = {Layout::fc1_b, Layout::fc2_b,
                                                       Layout::fc3_b, Layout::fc4_b};
inline constexpr std::array<int, kFcLayers> kFcInSize = {kFeat, kFcWidth, kFcWidth, kFcWidth};

/// Per-sample forward state; backward reads the stored pre-activations.
struct Workspace {
  std::array<double, kInSize> input{};
  std::array<double, kFeat> conv1_pre{}, conv1_act{}, conv2_pre{}, conv2_act{};
  std::array<std::array<double, kFcWidth>, kFcLayers> fc_pre{}, fc_act{};
  std::array<double, kOut> out{};
};

/// Uniform init with |w| <= sqrt(6 / fan_in) per layer, zero biases.
std::vector<double> init_params(std::uint64_t seed);

/// Runs the network on 15 inputs; rejects non-finite input.
void forward(const std::vector<double>& params, const double* input, Workspace& ws);

/// Per-sample squared-error loss ((dx)^2 + (dy)^2) / 2.
double sample_loss(const std::array<double, kOut>& pred, const double* target);

/// Mean of sample_loss over equal-length prediction/truth lists.
double loss(const std::vector<std::array<double, kOut>>& predictions,
            const std::vector<std::array<double, kOut>>& truths);

/// Accumulates d(sample_loss)/d(params) into grad (size kParamCount) using
/// the forward state left in ws.
void backward(const std::vector<double>& params, const Workspace& ws, const double* target,
              double* grad);

/// Samples are reduced in fixed blocks of this many, each block accumulated
/// in sample order and blocks summed in block order, so batch gradients are
/// bit-identical for any worker count.
inline constexpr int kGradBlock = 8;

/// Reusable buffers for batch_loss_grad.
struct BatchScratch {
  std::vector<double> block_grads;  // n_blocks x kParamCount
  std::vector<double> block_loss;
};

/// Mean loss and mean gradient over the indexed rows of an n x 15 input
/// matrix and n x 2 target matrix. Throws DivergenceError (with the layer
/// named) if any gradient entry is non-finite.
double batch_loss_grad(const std::vector<double>& params, const std::vector<double>& inputs,
                       const std::vector<double>& targets, const std::vector<std::size_t>& rows,
                       std::vector<double>& grad, BatchScratch& scratch);

/// Human-readable layer name owning flat parameter index i.
const char* layer_of_param(int i);

}  // namespace psog::nn
