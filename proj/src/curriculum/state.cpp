#include "permrl/curriculum/state.hpp"

#include "permrl/errors.hpp"

namespace permrl::curriculum {

std::string to_string(Task task) { return task == Task::kSpatial ? "spatial" : "temporal"; }

Task task_from_string(const std::string& name) {
  if (name == "spatial") return Task::kSpatial;
  if (name == "temporal") return Task::kTemporal;
  throw InvalidInput("unknown task '" + name + "' (expected spatial or temporal)");
}

PairScore score_pair(std::span<const double> p, std::size_t label) {
  if (p.size() < 2) throw InvalidInput("score_pair: need at least two classes");
  if (label >= p.size()) {
    throw InvalidInput("score_pair: label " + std::to_string(label) + " out of range for " +
                       std::to_string(p.size()) + " classes");
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j) {
    if (p[j] > p[best]) best = j;
  }
  std::size_t competitor = best;
  if (best == label) {
    competitor = label == 0 ? 1 : 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j != label && p[j] > p[competitor]) competitor = j;
    }
  }
  PairScore s;
  s.correct = best == label;
  s.ratio = (p[label] + 1.0) / (p[competitor] + 1.0);
  return s;
}

Validation validate(const Learner& learner, Task task) {
  if (!learner.has_task(task)) throw InvalidInput("validate: learner has no " + to_string(task) + " task");
  const std::size_t n_val = learner.validation_size(task);
  if (n_val == 0) throw InvalidInput("validate: empty validation set");
  const std::size_t n_perm = learner.permutations(task).size();

  Validation v;
  v.state.task = task;
  v.state.ratios.resize(static_cast<Eigen::Index>(n_perm), static_cast<Eigen::Index>(n_val));
  v.perm_errors.assign(n_perm, 0.0);
  std::uint64_t correct_total = 0;
  for (std::size_t i = 0; i < n_perm; ++i) {
    const nn::Matrix probs = learner.validation_probabilities(task, i);
    if (static_cast<std::size_t>(probs.rows()) != n_val || static_cast<std::size_t>(probs.cols()) != n_perm) {
      throw InvalidInput("validate: learner returned " + std::to_string(probs.rows()) + "x" +
                         std::to_string(probs.cols()) + " probabilities, expected " + std::to_string(n_val) + "x" +
                         std::to_string(n_perm));
    }
    std::size_t correct = 0;
    for (std::size_t x = 0; x < n_val; ++x) {
      const auto row = probs.row(static_cast<Eigen::Index>(x));
      const PairScore s = score_pair(std::span<const double>(row.data(), n_perm), i);
      v.state.ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(x)) = s.ratio;
      correct += s.correct ? 1 : 0;
    }
    v.forward_evaluations += n_val;
    correct_total += correct;
    v.perm_errors[i] = 1.0 - static_cast<double>(correct) / static_cast<double>(n_val);
  }
  v.error = 1.0 - static_cast<double>(correct_total) / static_cast<double>(n_perm * n_val);
  return v;
}

}  // namespace permrl::curriculum
