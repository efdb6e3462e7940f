#include "psog/reference.hpp"

#include <cmath>

namespace psog {
namespace {

using nn::kChannels;
using nn::kFcInSize;
using nn::kFcLayers;
using nn::kFcWidth;
using nn::kInCols;
using nn::kInRows;
using nn::kKernel;
using nn::kOut;
using nn::Layout;

// 2-D map with a one-pixel zero border so convolutions need no bounds
// checks.
struct Padded {
  std::vector<double> v;
  Padded() : v(static_cast<std::size_t>((kInRows + 2) * (kInCols + 2)), 0.0) {}
  double& at(int y, int x) { return v[static_cast<std::size_t>((y + 1) * (kInCols + 2) + x + 1)]; }
  double at(int y, int x) const {
    return v[static_cast<std::size_t>((y + 1) * (kInCols + 2) + x + 1)];
  }
};

}  // namespace

SensorFrame ref_simulate_frame(const Image& image, const ImageSpec& spec,
                               const ArrayLayout& layout, const Shift2D& shift, int head_dx_px,
                               int head_dy_px, bool compensate_head) {
  (void)spec;
  int ox = shift.realized_dx_px + (compensate_head ? head_dx_px : 0);
  int oy = shift.realized_dy_px + (compensate_head ? head_dy_px : 0);

  int side = layout.window_side_px;
  int half = side / 2;
  double sigma = side / 4.0;

  SensorFrame frame;
  frame.values.assign(static_cast<std::size_t>(layout.rows * layout.cols), 0.0);
  frame.shift = shift;
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      int cy = layout.array_center_y_px + (r - (layout.rows - 1) / 2) * layout.pitch_px + oy;
      int cx = layout.array_center_x_px + (c - (layout.cols - 1) / 2) * layout.pitch_px + ox;
      double num = 0.0;
      double den = 0.0;
      for (int i = -half; i <= half; ++i) {
        for (int j = -half; j <= half; ++j) {
          double w = std::exp(-(static_cast<double>(i) * i + static_cast<double>(j) * j) /
                              (2.0 * sigma * sigma));
          num += w * image.at(cy + i, cx + j);
          den += w;
        }
      }
      frame.values[static_cast<std::size_t>(r * layout.cols + c)] = num / den;
    }
  }
  return frame;
}

std::array<double, kOut> ref_forward(const std::vector<double>& params, const double* input) {
  const double* p = params.data();

  std::vector<Padded> in_maps(1);
  for (int y = 0; y < kInRows; ++y)
    for (int x = 0; x < kInCols; ++x) in_maps[0].at(y, x) = input[y * kInCols + x];

  auto conv = [&](const std::vector<Padded>& src, int w_off, int b_off, int n_in) {
    std::vector<Padded> dst(static_cast<std::size_t>(kChannels));
    for (int oc = 0; oc < kChannels; ++oc) {
      for (int y = 0; y < kInRows; ++y) {
        for (int x = 0; x < kInCols; ++x) {
          double acc = p[b_off + oc];
          for (int ic = 0; ic < n_in; ++ic) {
            for (int ki = 0; ki < kKernel; ++ki) {
              for (int kj = 0; kj < kKernel; ++kj) {
                double w = p[w_off + ((oc * n_in + ic) * kKernel + ki) * kKernel + kj];
                acc += w * src[static_cast<std::size_t>(ic)].at(y + ki - 1, x + kj - 1);
              }
            }
          }
          dst[static_cast<std::size_t>(oc)].at(y, x) = acc > 0.0 ? acc : 0.0;
        }
      }
    }
    return dst;
  };

  auto c1 = conv(in_maps, Layout::conv1_w, Layout::conv1_b, 1);
  auto c2 = conv(c1, Layout::conv2_w, Layout::conv2_b, kChannels);

  std::vector<double> act;
  act.reserve(static_cast<std::size_t>(kChannels * kInRows * kInCols));
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < kInRows; ++y)
      for (int x = 0; x < kInCols; ++x) act.push_back(c2[static_cast<std::size_t>(c)].at(y, x));

  for (int l = 0; l < kFcLayers; ++l) {
    int n_in = kFcInSize[static_cast<std::size_t>(l)];
    std::vector<double> next(static_cast<std::size_t>(kFcWidth));
    for (int o = 0; o < kFcWidth; ++o) {
      double acc = p[nn::kFcBOff[static_cast<std::size_t>(l)] + o];
      for (int i = 0; i < n_in; ++i)
        acc += p[nn::kFcWOff[static_cast<std::size_t>(l)] + o * n_in + i] *
               act[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = acc > 0.0 ? acc : 0.0;
    }
    act = next;
  }

  std::array<double, kOut> out{};
  for (int o = 0; o < kOut; ++o) {
    double acc = p[Layout::head_b + o];
    for (int i = 0; i < kFcWidth; ++i)
      acc += p[Layout::head_w + o * kFcWidth + i] * act[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

std::vector<double> fd_gradient(const std::vector<double>& params,
                                const std::vector<double>& inputs,
                                const std::vector<double>& targets,
                                const std::vector<std::size_t>& rows, double step) {
  auto batch_loss = [&](const std::vector<double>& p) {
    nn::Workspace ws;
    double acc = 0.0;
    for (std::size_t row : rows) {
      nn::forward(p, inputs.data() + row * nn::kInSize, ws);
      acc += nn::sample_loss(ws.out, targets.data() + row * nn::kOut);
    }
    return acc / static_cast<double>(rows.size());
  };

  std::vector<double> grad(params.size());
  std::vector<double> probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double saved = probe[i];
    probe[i] = saved + step;
    double lo_plus = batch_loss(probe);
    probe[i] = saved - step;
    double lo_minus = batch_loss(probe);
    probe[i] = saved;
    grad[i] = (lo_plus - lo_minus) / (2.0 * step);
  }
  return grad;
}

double normal_abs_le_fraction(double limit, double sigma) {
  return std::erf(limit / (sigma * std::sqrt(2.0)));
}

}  // namespace psog
