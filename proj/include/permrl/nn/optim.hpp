#pragma once

#include <cstdint>
#include <vector>

#include "permrl/nn/matrix.hpp"
#include "permrl/nn/param_store.hpp"

namespace permrl::nn {

/// value -= lr * grad for every tensor, then zeroes gradients and bumps the
/// update counter. Throws NumericError naming the tensor and step if any
/// gradient (or resulting value) is non-finite; parameters are left untouched
/// in the gradient case.
void sgd_step(ParamStore& store, double lr);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are created lazily to match the store.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Descends along the stored gradients.
  void step(ParamStore& store, double lr);

  std::uint64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t t_ = 0;
};

}  // namespace permrl::nn
