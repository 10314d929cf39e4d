// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "distilkit/tensor.hpp"

namespace distilkit {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// AdamW with decoupled weight decay and bias-corrected moments.
///
/// One step for parameter w with gradient g at step t (1-based):
///   w <- w * (1 - lr * wd)
///   m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2
///   w <- w - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class AdamW {
 public:
  explicit AdamW(AdamWConfig config);

  /// Updates every tensor in `params`. Each must have a same-shaped entry in
  /// `grads`; a missing one is rejected by name before anything is modified.
  void step(ParamMap& params, const ParamMap& grads);

  const AdamWConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr);
  std::uint64_t step_count() const noexcept { return step_count_; }
  const ParamMap& first_moment() const noexcept { return m_; }
  const ParamMap& second_moment() const noexcept { return v_; }

 private:
  AdamWConfig config_;
  std::uint64_t step_count_ = 0;
  ParamMap m_;
  ParamMap v_;
};

}  // namespace distilkit
