#include "permrl/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "permrl/errors.hpp"

namespace permrl::nn {

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

CrossEntropy cross_entropy(std::span<const double> probabilities, std::size_t target) {
  if (target >= probabilities.size()) {
    throw InvalidInput("cross_entropy: target " + std::to_string(target) + " out of range for " +
                       std::to_string(probabilities.size()) + " classes");
  }
  CrossEntropy out;
  out.loss = -std::log(std::max(probabilities[target], kProbabilityFloor));
  out.grad_logits.assign(probabilities.begin(), probabilities.end());
  out.grad_logits[target] -= 1.0;
  return out;
}

BatchCrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw InvalidInput("softmax_cross_entropy: " + std::to_string(logits.rows()) + " rows but " +
                       std::to_string(targets.size()) + " targets");
  }
  BatchCrossEntropy out;
  out.probabilities = softmax_rows(logits);
  out.grad_logits = out.probabilities;
  const double inv_batch = logits.rows() > 0 ? 1.0 / static_cast<double>(logits.rows()) : 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const std::size_t t = targets[static_cast<std::size_t>(r)];
    if (t >= static_cast<std::size_t>(logits.cols())) {
      throw InvalidInput("softmax_cross_entropy: target " + std::to_string(t) + " out of range for " +
                         std::to_string(logits.cols()) + " classes");
    }
    out.loss -= std::log(std::max(out.probabilities(r, static_cast<Eigen::Index>(t)), kProbabilityFloor));
    out.grad_logits(r, static_cast<Eigen::Index>(t)) -= 1.0;
  }
  out.loss *= inv_batch;
  out.grad_logits *= inv_batch;
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (const double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace permrl::nn
