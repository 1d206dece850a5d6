#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace permrl::curriculum {

struct ErrorPoint {
  std::int64_t step = 0;
  double error = 0.0;
};

/// Validation errors of one task, in the order they were measured.
class ErrorHistory {
 public:
  /// Throws InvalidInput when step does not increase or error is outside [0, 1].
  void append(std::int64_t step, double error);

  bool empty() const noexcept { return points_.empty(); }
  std::size_t size() const noexcept { return points_.size(); }
  const ErrorPoint& back() const { return points_.back(); }
  const std::vector<ErrorPoint>& points() const noexcept { return points_; }

 private:
  std::vector<ErrorPoint> points_;
};

/// clamp(2 * current - previous, 0, 1); just `current` without a previous point.
double extrapolate_error(std::optional<double> previous, double current);

/// Baseline for the point after `step`: extrapolates from the entry at `step`
/// and the one before it. Throws InvalidInput on an empty history or an
/// unknown step.
double baseline_error(const ErrorHistory& history, std::int64_t step);

/// Baseline after the newest entry.
double baseline_error(const ErrorHistory& history);

inline double compute_reward(double baseline, double next_error) { return baseline - next_error; }

}  // namespace permrl::curriculum
