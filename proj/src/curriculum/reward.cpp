#include "permrl/curriculum/reward.hpp"

#include <algorithm>
#include <string>

#include "permrl/errors.hpp"

namespace permrl::curriculum {

void ErrorHistory::append(std::int64_t step, double error) {
  if (!(error >= 0.0 && error <= 1.0)) {
    throw InvalidInput("error history: error " + std::to_string(error) + " outside [0, 1]");
  }
  if (!points_.empty() && step <= points_.back().step) {
    throw InvalidInput("error history: step " + std::to_string(step) + " does not follow step " +
                       std::to_string(points_.back().step));
  }
  points_.push_back({step, error});
}

double extrapolate_error(std::optional<double> previous, double current) {
  if (!previous) return current;
  return std::clamp(2.0 * current - *previous, 0.0, 1.0);
}

double baseline_error(const ErrorHistory& history, std::int64_t step) {
  if (history.empty()) throw InvalidInput("baseline_error: empty error history");
  const auto& pts = history.points();
  const auto it = std::find_if(pts.begin(), pts.end(), [&](const ErrorPoint& p) { return p.step == step; });
  if (it == pts.end()) throw InvalidInput("baseline_error: no error recorded at step " + std::to_string(step));
  if (it == pts.begin()) return extrapolate_error(std::nullopt, it->error);
  return extrapolate_error(std::prev(it)->error, it->error);
}

double baseline_error(const ErrorHistory& history) {
  if (history.empty()) throw InvalidInput("baseline_error: empty error history");
  return baseline_error(history, history.back().step);
}

}  // namespace permrl::curriculum
