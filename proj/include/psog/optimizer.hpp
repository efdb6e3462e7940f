#pragma once

#include <cstddef>
#include <vector>

#include "psog/common.hpp"

namespace psog::nn {

struct AdamConfig {
  double learning_rate = 4e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Adaptive-moment optimizer with bias-corrected first and second moments.
class Adam {
 public:
  Adam(std::size_t n_params, AdamConfig cfg);

  /// params -= lr * m_hat / (sqrt(v_hat) + eps), elementwise.
  void step(std::vector<double>& params, const std::vector<double>& grad);

  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

}  // namespace psog::nn
