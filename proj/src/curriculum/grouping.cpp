#include "permrl/curriculum/grouping.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "permrl/errors.hpp"
#include "permrl/nn/rng.hpp"

namespace permrl::curriculum {

namespace {

using nn::Matrix;

double sq_dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

std::size_t nearest(const Matrix& rows, Eigen::Index i, const Matrix& centroids) {
  std::size_t best = 0;
  double best_d = sq_dist(rows, i, centroids, 0);
  for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
    const double d = sq_dist(rows, i, centroids, c);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

Matrix seed_centroids(const Matrix& rows, std::size_t k, nn::Rng& rng) {
  const auto n = static_cast<std::size_t>(rows.rows());
  Matrix c(static_cast<Eigen::Index>(k), rows.cols());
  std::vector<bool> taken(n, false);
  std::size_t first = rng.below(n);
  taken[first] = true;
  c.row(0) = rows.row(static_cast<Eigen::Index>(first));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t m = 1; m < k; ++m) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(rows, static_cast<Eigen::Index>(i), c, static_cast<Eigen::Index>(m - 1)));
      total += taken[i] ? 0.0 : d2[i];
    }
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) w[i] = total > 0.0 ? d2[i] : 1.0;
    }
    const std::size_t pick = rng.categorical(w);
    taken[pick] = true;
    c.row(static_cast<Eigen::Index>(m)) = rows.row(static_cast<Eigen::Index>(pick));
  }
  return c;
}

void repair_empty(const Matrix& rows, const Matrix& centroids, std::vector<std::size_t>& assign,
                  std::vector<std::size_t>& sizes) {
  for (std::size_t empty = 0; empty < sizes.size(); ++empty) {
    if (sizes[empty] != 0) continue;
    const auto largest = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::size_t far = assign.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < assign.size(); ++i) {
      if (assign[i] != largest) continue;
      const double d = sq_dist(rows, static_cast<Eigen::Index>(i), centroids, static_cast<Eigen::Index>(largest));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    assign[far] = empty;
    --sizes[largest];
    sizes[empty] = 1;
  }
}

Matrix group_means(const Matrix& rows, std::span<const std::size_t> assign, std::size_t k) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(k), rows.cols());
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < assign.size(); ++i) {
    m.row(static_cast<Eigen::Index>(assign[i])) += rows.row(static_cast<Eigen::Index>(i));
    ++count[assign[i]];
  }
  for (std::size_t g = 0; g < k; ++g) {
    if (count[g] > 0) m.row(static_cast<Eigen::Index>(g)) /= static_cast<double>(count[g]);
  }
  return m;
}

// Hartigan single-point transfers: move a row to another group whenever that
// lowers the within-group sum of squares, with exact mean updates. Lloyd's
// fixed points are not always stable under such moves; the optimum is.
bool transfer_pass(const Matrix& rows, Matrix& centroids, std::vector<std::size_t>& assign,
                   std::vector<std::size_t>& sizes) {
  bool moved_any = false;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    const std::size_t from = assign[i];
    if (sizes[from] < 2) continue;
    const auto r = static_cast<Eigen::Index>(i);
    const double n_from = static_cast<double>(sizes[from]);
    const double removal = n_from / (n_from - 1.0) * sq_dist(rows, r, centroids, static_cast<Eigen::Index>(from));
    std::size_t to = from;
    double best = removal;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
      if (g == from) continue;
      const double n_to = static_cast<double>(sizes[g]);
      const double cost = n_to / (n_to + 1.0) * sq_dist(rows, r, centroids, static_cast<Eigen::Index>(g));
      if (cost < best - 1e-12 * (1.0 + removal)) {
        best = cost;
        to = g;
      }
    }
    if (to == from) continue;
    const auto f = static_cast<Eigen::Index>(from);
    const auto t = static_cast<Eigen::Index>(to);
    centroids.row(f) = (centroids.row(f) * n_from - rows.row(r)) / (n_from - 1.0);
    const double n_to = static_cast<double>(sizes[to]);
    centroids.row(t) = (centroids.row(t) * n_to + rows.row(r)) / (n_to + 1.0);
    --sizes[from];
    ++sizes[to];
    assign[i] = to;
    moved_any = true;
  }
  return moved_any;
}

Grouping lloyd(const Matrix& rows, std::size_t k, nn::Rng& rng, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(rows.rows());
  Matrix centroids = seed_centroids(rows, k, rng);
  std::vector<std::size_t> assign(n, 0);
  std::vector<std::size_t> sizes(k, 0);
  std::size_t iter = 0;
  while (true) {
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest(rows, static_cast<Eigen::Index>(i), centroids);
      ++sizes[assign[i]];
    }
    repair_empty(rows, centroids, assign, sizes);
    ++iter;
    Matrix next = group_means(rows, assign, k);
    const double moved = (next - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(next);
    if (moved < options.tolerance || iter >= options.max_iterations) break;
  }
  for (std::size_t pass = 0; pass < options.max_iterations && transfer_pass(rows, centroids, assign, sizes); ++pass) {
  }
  centroids = group_means(rows, assign, k);
  Grouping g;
  g.assignment = std::move(assign);
  g.sizes = std::move(sizes);
  g.centroids = std::move(centroids);
  g.objective = within_group_ss(rows, g.assignment, k);
  g.iterations = iter;
  return g;
}

}  // namespace

std::vector<std::size_t> Grouping::members(std::size_t group) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == group) out.push_back(i);
  }
  return out;
}

double within_group_ss(const Matrix& rows, std::span<const std::size_t> assignment, std::size_t k) {
  if (assignment.size() != static_cast<std::size_t>(rows.rows())) {
    throw InvalidInput("within_group_ss: assignment length does not match row count");
  }
  for (std::size_t a : assignment) {
    if (a >= k) throw InvalidInput("within_group_ss: group id " + std::to_string(a) + " >= " + std::to_string(k));
  }
  const Matrix means = group_means(rows, assignment, k);
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    total += sq_dist(rows, static_cast<Eigen::Index>(i), means, static_cast<Eigen::Index>(assignment[i]));
  }
  return total;
}

Grouping kmeans(const Matrix& rows, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (k == 0) throw InvalidInput("kmeans: need at least one group");
  if (k > n) {
    throw InvalidInput("kmeans: " + std::to_string(k) + " groups requested for " + std::to_string(n) + " rows");
  }
  if (options.max_iterations == 0 || options.restarts == 0) {
    throw InvalidInput("kmeans: max_iterations and restarts must be positive");
  }
  Grouping best;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    nn::Rng rng(nn::derive_seed(seed, "kmeans.restart." + std::to_string(r)));
    Grouping g = lloyd(rows, k, rng, options);
    if (r == 0 || g.objective < best.objective) best = std::move(g);
  }
  return best;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> GroupedState::features() const {
  std::vector<double> out;
  out.reserve(2 * order.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.push_back(sizes[j]);
    out.push_back(medians[j]);
  }
  return out;
}

GroupedState aggregate_state(const NetworkStateMatrix& state, const Grouping& grouping) {
  const auto n = static_cast<std::size_t>(state.ratios.rows());
  const std::size_t k = grouping.group_count();
  if (grouping.assignment.size() != n) {
    throw InvalidInput("aggregate_state: grouping covers " + std::to_string(grouping.assignment.size()) +
                       " rows, state has " + std::to_string(n));
  }
  std::vector<std::vector<double>> entries(k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = grouping.assignment[i];
    if (g >= k) throw InvalidInput("aggregate_state: group id " + std::to_string(g) + " out of range");
    ++counts[g];
    const auto row = state.ratios.row(static_cast<Eigen::Index>(i));
    entries[g].insert(entries[g].end(), row.data(), row.data() + row.size());
  }
  std::vector<double> med(k);
  for (std::size_t g = 0; g < k; ++g) {
    if (counts[g] == 0) throw InvalidInput("aggregate_state: group " + std::to_string(g) + " is empty");
    med[g] = median(std::move(entries[g]));
  }
  GroupedState s;
  s.order.resize(k);
  std::iota(s.order.begin(), s.order.end(), std::size_t{0});
  std::stable_sort(s.order.begin(), s.order.end(), [&](std::size_t a, std::size_t b) { return med[a] < med[b]; });
  for (std::size_t g : s.order) {
    s.sizes.push_back(static_cast<double>(counts[g]) / static_cast<double>(n));
    s.medians.push_back(med[g]);
  }
  return s;
}

}  // namespace permrl::curriculum
