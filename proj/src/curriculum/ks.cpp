#include "permrl/curriculum/ks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "permrl/errors.hpp"

namespace permrl::curriculum {

double kolmogorov_survival(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("ks_two_sample: both samples must be nonempty");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_survival(ne * d);
  return r;
}

GroupDiagnostic group_count_diagnostic(const NetworkStateMatrix& state, const Grouping& grouping, double alpha) {
  const std::size_t k = grouping.group_count();
  if (grouping.assignment.size() != static_cast<std::size_t>(state.ratios.rows())) {
    throw InvalidInput("group_count_diagnostic: grouping does not match the state matrix");
  }
  std::vector<std::vector<double>> values(k);
  for (std::size_t i = 0; i < grouping.assignment.size(); ++i) {
    const auto row = state.ratios.row(static_cast<Eigen::Index>(i));
    auto& v = values.at(grouping.assignment[i]);
    v.insert(v.end(), row.data(), row.data() + row.size());
  }
  GroupDiagnostic out;
  out.alpha = alpha;
  out.p_values = nn::Matrix::Ones(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t h = g + 1; h < k; ++h) {
      const double p = ks_two_sample(values[g], values[h]).p_value;
      out.p_values(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(h)) = p;
      out.p_values(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(g)) = p;
      if (p >= alpha) out.too_many_groups = true;
    }
  }
  return out;
}

}  // namespace permrl::curriculum
