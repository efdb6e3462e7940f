#include "psog/optimizer.hpp"

#include <cmath>

namespace psog::nn {

void AdamConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("moment coefficients must lie in [0,1)");
  if (epsilon <= 0.0) throw ConfigError("optimizer epsilon must be positive");
}

Adam::Adam(std::size_t n_params, AdamConfig cfg)
    : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {
  cfg_.validate();
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ConfigError("optimizer state does not match parameter count");
  ++t_;
  double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grad[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    double m_hat = m_[i] / c1;
    double v_hat = v_[i] / c2;
    params[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
  }
}

}  // namespace psog::nn
