#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "permrl/curriculum/grouping.hpp"
#include "permrl/curriculum/state.hpp"
#include "permrl/nn/matrix.hpp"

namespace permrl::curriculum {

struct KsResult {
  double statistic = 0.0;  // sup |F_a - F_b|
  double p_value = 1.0;
};

/// Survival function of the Kolmogorov distribution,
/// Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2), with Q(l) = 1 for small l.
double kolmogorov_survival(double lambda);

/**
 * Two-sample Kolmogorov-Smirnov test. The p-value is Q(l) with
 * l = sqrt(ne) * D and ne = na * nb / (na + nb).
 * Throws InvalidInput on an empty sample.
 */
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct GroupDiagnostic {
  nn::Matrix p_values;  // k x k, symmetric, diagonal 1
  double alpha = 0.01;
  bool too_many_groups = false;  // some pair is indistinguishable at alpha
};

/// Pairwise tests between the ratio distributions of every pair of groups.
GroupDiagnostic group_count_diagnostic(const NetworkStateMatrix& state, const Grouping& grouping,
                                       double alpha = 0.01);

}  // namespace permrl::curriculum
