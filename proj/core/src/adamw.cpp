// SPDX-License-Identifier: Apache-2.0
#include "distilkit/adamw.hpp"

#include <cmath>

#include "distilkit/error.hpp"

namespace distilkit {

void AdamWConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("adamw: learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ValidationError("adamw: weight decay must be non-negative");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ValidationError("adamw: beta1 must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ValidationError("adamw: beta2 must lie in (0,1)");
  if (!(epsilon > 0.0 && epsilon <= 1e-4)) throw ValidationError("adamw: epsilon must lie in (0,1e-4]");
}

AdamW::AdamW(AdamWConfig config) : config_(config) { config_.validate(); }

void AdamW::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw ValidationError("adamw: learning rate must be positive");
  config_.learning_rate = lr;
}

void AdamW::step(ParamMap& params, const ParamMap& grads) {
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ValidationError("adamw: missing gradient for parameter '" + name + "'");
    if (it->second.shape() != p.shape()) {
      throw ShapeError("adamw: gradient shape " + shape_to_string(it->second.shape()) + " does not match parameter '" +
                       name + "' shape " + shape_to_string(p.shape()));
    }
  }

  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  const double lr = config_.learning_rate;
  const double decay = 1.0 - lr * config_.weight_decay;

  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    auto [mit, m_new] = m_.try_emplace(name, p.shape(), 0.0);
    auto [vit, v_new] = v_.try_emplace(name, p.shape(), 0.0);
    auto w = p.data();
    auto m = mit->second.data();
    auto v = vit->second.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] *= decay;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gd[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gd[i] * gd[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace distilkit
