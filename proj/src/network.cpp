#include "psog/network.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace psog::nn {
namespace {

inline int feat_idx(int c, int y, int x) { return (c * kInRows + y) * kInCols + x; }
inline int in_idx(int y, int x) { return y * kInCols + x; }
inline double relu(double v) { return v > 0.0 ? v : 0.0; }
// Subgradient at the kink is taken as 0.
inline double relu_gate(double pre) { return pre > 0.0 ? 1.0 : 0.0; }

void fill_uniform(Rng& rng, double* w, int n, double limit) {
  for (int i = 0; i < n; ++i) w[i] = rng.uniform(-limit, limit);
}

}  // namespace

std::vector<double> init_params(std::uint64_t seed) {
  std::vector<double> p(static_cast<std::size_t>(kParamCount), 0.0);
  Rng rng(seed);
  auto limit = [](int fan_in) { return std::sqrt(6.0 / fan_in); };
  fill_uniform(rng, p.data() + Layout::conv1_w, kChannels * kKernel * kKernel,
               limit(kKernel * kKernel));
  fill_uniform(rng, p.data() + Layout::conv2_w, kChannels * kChannels * kKernel * kKernel,
               limit(kChannels * kKernel * kKernel));
  for (int l = 0; l < kFcLayers; ++l) {
    fill_uniform(rng, p.data() + kFcWOff[l], kFcWidth * kFcInSize[l], limit(kFcInSize[l]));
  }
  fill_uniform(rng, p.data() + Layout::head_w, kOut * kFcWidth, limit(kFcWidth));
  return p;
}

void forward(const std::vector<double>& params, const double* input, Workspace& ws) {
  if (params.size() != static_cast<std::size_t>(kParamCount))
    throw ConfigError("parameter vector has wrong size");
  for (int i = 0; i < kInSize; ++i) {
    if (!std::isfinite(input[i])) throw ConfigError("non-finite network input");
    ws.input[static_cast<std::size_t>(i)] = input[i];
  }
  const double* p = params.data();

  // conv1: 1 input channel, zero padding keeps the 3x5 map.
  for (int oc = 0; oc < kChannels; ++oc) {
    const double* w = p + Layout::conv1_w + oc * kKernel * kKernel;
    double b = p[Layout::conv1_b + oc];
    for (int y = 0; y < kInRows; ++y) {
      for (int x = 0; x < kInCols; ++x) {
        double acc = b;
        for (int ki = 0; ki < kKernel; ++ki) {
          int yy = y + ki - 1;
          if (yy < 0 || yy >= kInRows) continue;
          for (int kj = 0; kj < kKernel; ++kj) {
            int xx = x + kj - 1;
            if (xx < 0 || xx >= kInCols) continue;
            acc += w[ki * kKernel + kj] * ws.input[static_cast<std::size_t>(in_idx(yy, xx))];
          }
        }
        ws.conv1_pre[static_cast<std::size_t>(feat_idx(oc, y, x))] = acc;
      }
    }
  }
  for (int i = 0; i < kFeat; ++i)
    ws.conv1_act[static_cast<std::size_t>(i)] = relu(ws.conv1_pre[static_cast<std::size_t>(i)]);

  // conv2: 4 -> 4 channels.
  for (int oc = 0; oc < kChannels; ++oc) {
    double b = p[Layout::conv2_b + oc];
    for (int y = 0; y < kInRows; ++y) {
      for (int x = 0; x < kInCols; ++x) {
        double acc = b;
        for (int ic = 0; ic < kChannels; ++ic) {
          const double* w = p + Layout::conv2_w + ((oc * kChannels + ic) * kKernel * kKernel);
          for (int ki = 0; ki < kKernel; ++ki) {
            int yy = y + ki - 1;
            if (yy < 0 || yy >= kInRows) continue;
            for (int kj = 0; kj < kKernel; ++kj) {
              int xx = x + kj - 1;
              if (xx < 0 || xx >= kInCols) continue;
              acc += w[ki * kKernel + kj] *
                     ws.conv1_act[static_cast<std::size_t>(feat_idx(ic, yy, xx))];
            }
          }
        }
        ws.conv2_pre[static_cast<std::size_t>(feat_idx(oc, y, x))] = acc;
      }
    }
  }
  for (int i = 0; i < kFeat; ++i)
    ws.conv2_act[static_cast<std::size_t>(i)] = relu(ws.conv2_pre[static_cast<std::size_t>(i)]);

  // FC stack; the flattened conv2 activations feed fc1.
  for (int l = 0; l < kFcLayers; ++l) {
    const double* in = l == 0 ? ws.conv2_act.data() : ws.fc_act[static_cast<std::size_t>(l - 1)].data();
    int n_in = kFcInSize[static_cast<std::size_t>(l)];
    for (int o = 0; o < kFcWidth; ++o) {
      const double* w = p + kFcWOff[static_cast<std::size_t>(l)] + o * n_in;
      double acc = p[kFcBOff[static_cast<std::size_t>(l)] + o];
      for (int i = 0; i < n_in; ++i) acc += w[i] * in[i];
      ws.fc_pre[static_cast<std::size_t>(l)][static_cast<std::size_t>(o)] = acc;
      ws.fc_act[static_cast<std::size_t>(l)][static_cast<std::size_t>(o)] = relu(acc);
    }
  }

  const double* last = ws.fc_act[kFcLayers - 1].data();
  for (int o = 0; o < kOut; ++o) {
    const double* w = p + Layout::head_w + o * kFcWidth;
    double acc = p[Layout::head_b + o];
    for (int i = 0; i < kFcWidth; ++i) acc += w[i] * last[i];
    ws.out[static_cast<std::size_t>(o)] = acc;
  }
}

double sample_loss(const std::array<double, kOut>& pred, const double* target) {
  double dx = pred[0] - target[0];
  double dy = pred[1] - target[1];
  return (dx * dx + dy * dy) / 2.0;
}

double loss(const std::vector<std::array<double, kOut>>& predictions,
            const std::vector<std::array<double, kOut>>& truths) {
  if (predictions.empty()) throw ConfigError("loss over an empty batch");
  if (predictions.size() != truths.size()) throw ConfigError("prediction/truth length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    acc += sample_loss(predictions[i], truths[i].data());
  return acc / static_cast<double>(predictions.size());
}

void backward(const std::vector<double>& params, const Workspace& ws, const double* target,
              double* grad) {
  const double* p = params.data();

  std::array<double, kOut> d_out{};
  for (int o = 0; o < kOut; ++o) d_out[static_cast<std::size_t>(o)] = ws.out[static_cast<std::size_t>(o)] - target[o];

  // Head.
  std::array<double, kFcWidth> d_fc{};
  const double* last = ws.fc_act[kFcLayers - 1].data();
  for (int o = 0; o < kOut; ++o) {
    double g = d_out[static_cast<std::size_t>(o)];
    double* gw = grad + Layout::head_w + o * kFcWidth;
    for (int i = 0; i < kFcWidth; ++i) gw[i] += g * last[i];
    grad[Layout::head_b + o] += g;
    const double* w = p + Layout::head_w + o * kFcWidth;
    for (int i = 0; i < kFcWidth; ++i) d_fc[static_cast<std::size_t>(i)] += w[i] * g;
  }

  // FC stack, last to first; d_fc enters as the gradient wrt fc_act[l].
  std::array<double, kFeat> d_feat{};
  for (int l = kFcLayers - 1; l >= 0; --l) {
    std::array<double, kFcWidth> d_pre{};
    for (int o = 0; o < kFcWidth; ++o)
      d_pre[static_cast<std::size_t>(o)] =
          d_fc[static_cast<std::size_t>(o)] *
          relu_gate(ws.fc_pre[static_cast<std::size_t>(l)][static_cast<std::size_t>(o)]);
    const double* in = l == 0 ? ws.conv2_act.data() : ws.fc_act[static_cast<std::size_t>(l - 1)].data();
    int n_in = kFcInSize[static_cast<std::size_t>(l)];
    for (int o = 0; o < kFcWidth; ++o) {
      double g = d_pre[static_cast<std::size_t>(o)];
      if (g == 0.0) continue;
      double* gw = grad + kFcWOff[static_cast<std::size_t>(l)] + o * n_in;
      for (int i = 0; i < n_in; ++i) gw[i] += g * in[i];
      grad[kFcBOff[static_cast<std::size_t>(l)] + o] += g;
    }
    if (l == 0) {
      for (int o = 0; o < kFcWidth; ++o) {
        double g = d_pre[static_cast<std::size_t>(o)];
        if (g == 0.0) continue;
        const double* w = p + kFcWOff[0] + o * kFeat;
        for (int i = 0; i < kFeat; ++i) d_feat[static_cast<std::size_t>(i)] += w[i] * g;
      }
    } else {
      std::array<double, kFcWidth> d_prev{};
      for (int o = 0; o < kFcWidth; ++o) {
        double g = d_pre[static_cast<std::size_t>(o)];
        if (g == 0.0) continue;
        const double* w = p + kFcWOff[static_cast<std::size_t>(l)] + o * kFcWidth;
        for (int i = 0; i < kFcWidth; ++i) d_prev[static_cast<std::size_t>(i)] += w[i] * g;
      }
      d_fc = d_prev;
    }
  }

  // conv2 backward; d_feat is the gradient wrt conv2_act.
  std::array<double, kFeat> d_conv1_act{};
  for (int oc = 0; oc < kChannels; ++oc) {
    for (int y = 0; y < kInRows; ++y) {
      for (int x = 0; x < kInCols; ++x) {
        double g = d_feat[static_cast<std::size_t>(feat_idx(oc, y, x))] *
                   relu_gate(ws.conv2_pre[static_cast<std::size_t>(feat_idx(oc, y, x))]);
        if (g == 0.0) continue;
        grad[Layout::conv2_b + oc] += g;
        for (int ic = 0; ic < kChannels; ++ic) {
          const double* w = p + Layout::conv2_w + ((oc * kChannels + ic) * kKernel * kKernel);
          double* gw = grad + Layout::conv2_w + ((oc * kChannels + ic) * kKernel * kKernel);
          for (int ki = 0; ki < kKernel; ++ki) {
            int yy = y + ki - 1;
            if (yy < 0 || yy >= kInRows) continue;
            for (int kj = 0; kj < kKernel; ++kj) {
              int xx = x + kj - 1;
              if (xx < 0 || xx >= kInCols) continue;
              int fi = feat_idx(ic, yy, xx);
              gw[ki * kKernel + kj] += g * ws.conv1_act[static_cast<std::size_t>(fi)];
              d_conv1_act[static_cast<std::size_t>(fi)] += w[ki * kKernel + kj] * g;
            }
          }
        }
      }
    }
  }

  // conv1 backward.
  for (int oc = 0; oc < kChannels; ++oc) {
    double* gw = grad + Layout::conv1_w + oc * kKernel * kKernel;
    for (int y = 0; y < kInRows; ++y) {
      for (int x = 0; x < kInCols; ++x) {
        double g = d_conv1_act[static_cast<std::size_t>(feat_idx(oc, y, x))] *
                   relu_gate(ws.conv1_pre[static_cast<std::size_t>(feat_idx(oc, y, x))]);
        if (g == 0.0) continue;
        grad[Layout::conv1_b + oc] += g;
        for (int ki = 0; ki < kKernel; ++ki) {
          int yy = y + ki - 1;
          if (yy < 0 || yy >= kInRows) continue;
          for (int kj = 0; kj < kKernel; ++kj) {
            int xx = x + kj - 1;
            if (xx < 0 || xx >= kInCols) continue;
            gw[ki * kKernel + kj] += g * ws.input[static_cast<std::size_t>(in_idx(yy, xx))];
          }
        }
      }
    }
  }
}

const char* layer_of_param(int i) {
  if (i < Layout::conv1_b) return "conv1.weight";
  if (i < Layout::conv2_w) return "conv1.bias";
  if (i < Layout::conv2_b) return "conv2.weight";
  if (i < Layout::fc1_w) return "conv2.bias";
  for (int l = 0; l < kFcLayers; ++l) {
    int w0 = kFcWOff[static_cast<std::size_t>(l)];
    int b0 = kFcBOff[static_cast<std::size_t>(l)];
    if (i >= w0 && i < b0) {
      static const char* wn[] = {"fc1.weight", "fc2.weight", "fc3.weight", "fc4.weight"};
      return wn[l];
    }
    if (i >= b0 && i < b0 + kFcWidth) {
      static const char* bn[] = {"fc1.bias", "fc2.bias", "fc3.bias", "fc4.bias"};
      return bn[l];
    }
  }
  if (i < Layout::head_b) return "head.weight";
  return "head.bias";
}

double batch_loss_grad(const std::vector<double>& params, const std::vector<double>& inputs,
                       const std::vector<double>& targets, const std::vector<std::size_t>& rows,
                       std::vector<double>& grad, BatchScratch& scratch) {
  if (rows.empty()) throw ConfigError("gradient over an empty batch");
  auto n = static_cast<std::int64_t>(rows.size());
  auto n_blocks = static_cast<std::int64_t>((n + kGradBlock - 1) / kGradBlock);
  scratch.block_grads.assign(static_cast<std::size_t>(n_blocks) * kParamCount, 0.0);
  scratch.block_loss.assign(static_cast<std::size_t>(n_blocks), 0.0);

#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    Workspace ws;
    double* bg = scratch.block_grads.data() + static_cast<std::size_t>(b) * kParamCount;
    double block_loss = 0.0;
    std::int64_t lo = b * kGradBlock;
    std::int64_t hi = std::min(n, lo + kGradBlock);
    for (std::int64_t k = lo; k < hi; ++k) {
      std::size_t row = rows[static_cast<std::size_t>(k)];
      const double* in = inputs.data() + row * kInSize;
      const double* tg = targets.data() + row * kOut;
      forward(params, in, ws);
      block_loss += sample_loss(ws.out, tg);
      backward(params, ws, tg, bg);
    }
    scratch.block_loss[static_cast<std::size_t>(b)] = block_loss;
  }

  grad.assign(static_cast<std::size_t>(kParamCount), 0.0);
  double total_loss = 0.0;
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    const double* bg = scratch.block_grads.data() + static_cast<std::size_t>(b) * kParamCount;
    for (int i = 0; i < kParamCount; ++i) grad[static_cast<std::size_t>(i)] += bg[i];
    total_loss += scratch.block_loss[static_cast<std::size_t>(b)];
  }
  double inv_n = 1.0 / static_cast<double>(n);
  for (double& g : grad) g *= inv_n;

  for (int i = 0; i < kParamCount; ++i) {
    if (!std::isfinite(grad[static_cast<std::size_t>(i)])) {
      throw DivergenceError(std::string("non-finite gradient in ") + layer_of_param(i));
    }
  }
  return total_loss * inv_n;
}

}  // namespace psog::nn
