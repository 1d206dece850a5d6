#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "permrl/nn/param_store.hpp"

namespace permrl::nn {

/// Returns the scalar loss. When `with_grad` is true it must also accumulate
/// dLoss/dparam into the store's gradient buffers (which the checker zeroes
/// first).
using LossClosure = std::function<double(ParamStore& store, bool with_grad)>;

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coords_per_tensor = 200;
  std::uint64_t seed = 0;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor),
  /// so coordinates with a vanishing gradient are judged absolutely.
  double denominator_floor = 1e-6;
};

struct TensorGradCheck {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<TensorGradCheck> tensors;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Central differences on a seeded subsample of each tensor's coordinates.
/// Parameter values are restored afterwards and gradients zeroed.
GradCheckReport grad_check(ParamStore& store, const LossClosure& loss, double tolerance,
                           const GradCheckOptions& options = {});

}  // namespace permrl::nn
