#pragma once

/**
 * @file grouping.hpp
 * @brief k-means over state-matrix rows and the grouped policy input.
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "permrl/curriculum/state.hpp"
#include "permrl/nn/matrix.hpp"

namespace permrl::curriculum {

struct Grouping {
  std::vector<std::size_t> assignment;  // row -> group id
  nn::Matrix centroids;                 // k x dim, means of the final groups
  std::vector<std::size_t> sizes;
  double objective = 0.0;               // within-group sum of squared distances
  std::size_t iterations = 0;           // Lloyd iterations of the kept restart

  std::size_t group_count() const noexcept { return sizes.size(); }
  /// Row ids of one group, ascending.
  std::vector<std::size_t> members(std::size_t group) const;
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-9;   // stop once no centroid moves farther than this
  std::size_t restarts = 16;  // independent seedings; the lowest objective wins
};

/**
 * Lloyd's algorithm with k-means++ seeding (first center uniform, then by
 * squared distance; uniform when all distances vanish). Assignment ties go
 * to the lower group id. An empty group takes the member farthest from its
 * centroid out of the largest group. After Lloyd converges, single rows are
 * moved between groups while that lowers the objective. Deterministic per seed. Throws
 * InvalidInput when k is 0 or exceeds the number of rows.
 */
Grouping kmeans(const nn::Matrix& rows, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Sum of squared distances of each row to its group mean.
double within_group_ss(const nn::Matrix& rows, std::span<const std::size_t> assignment, std::size_t k);

inline Grouping group_permutations(const NetworkStateMatrix& state, std::size_t n_groups, std::uint64_t seed,
                                   const KMeansOptions& options = {}) {
  return kmeans(state.ratios, n_groups, seed, options);
}

/// Median with the mean of the middle pair for even counts. InvalidInput if empty.
double median(std::vector<double> values);

/**
 * Policy input. Action j refers to group order[j]; actions are sorted by
 * ascending median ratio (hardest first), ties by group id.
 */
struct GroupedState {
  std::vector<std::size_t> order;
  std::vector<double> sizes;    // |c| / |Psi|, per action
  std::vector<double> medians;  // per action

  std::size_t action_count() const noexcept { return order.size(); }
  /// [size_0, median_0, size_1, median_1, ...]
  std::vector<double> features() const;
};

/// Throws InvalidInput if the grouping does not cover every row.
GroupedState aggregate_state(const NetworkStateMatrix& state, const Grouping& grouping);

}  // namespace permrl::curriculum
