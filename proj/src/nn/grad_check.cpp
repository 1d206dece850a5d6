#include "permrl/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "permrl/nn/rng.hpp"

namespace permrl::nn {

GradCheckReport grad_check(ParamStore& store, const LossClosure& loss, double tolerance,
                           const GradCheckOptions& options) {
  store.zero_grad();
  loss(store, true);
  std::vector<Matrix> analytic;
  for (const auto& p : store) analytic.push_back(p.grad);
  store.zero_grad();

  Rng rng(derive_seed(options.seed, "grad_check"));
  GradCheckReport report;
  report.passed = true;
  for (std::size_t k = 0; k < store.size(); ++k) {
    auto& p = store[k];
    const auto total = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (total > options.max_coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    TensorGradCheck check{p.name, coords.size(), 0.0, true};
    for (const std::size_t c : coords) {
      double& x = p.value.data()[c];
      const double saved = x;
      x = saved + options.step;
      const double up = loss(store, false);
      x = saved - options.step;
      const double down = loss(store, false);
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k].data()[c];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      check.max_rel_error = std::max(check.max_rel_error, std::abs(a - numeric) / denom);
    }
    check.passed = check.max_rel_error < tolerance;
    report.passed = report.passed && check.passed;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  store.zero_grad();
  return report;
}

}  // namespace permrl::nn
