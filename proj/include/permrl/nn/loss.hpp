#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "permrl/nn/matrix.hpp"

namespace permrl::nn {

/// Probabilities are clamped below by this before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// Max-subtracted softmax of one logit vector.
std::vector<double> softmax(std::span<const double> logits);
/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> grad_logits;  // p - onehot(target)
};

/// -ln(max(p_target, 1e-12)) and its gradient w.r.t. the logits that produced p.
/// Throws InvalidInput when target is out of range.
CrossEntropy cross_entropy(std::span<const double> probabilities, std::size_t target);

struct BatchCrossEntropy {
  double loss = 0.0;     // mean over the batch
  Matrix grad_logits;    // (softmax - onehot) / batch
  Matrix probabilities;
};

BatchCrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> targets);

/// Shannon entropy in nats.
double entropy(std::span<const double> p);

}  // namespace permrl::nn
