#pragma once

/**
 * @file state.hpp
 * @brief Validation of a learner over the full (permutation x sample) cross
 * product, producing the softmax-ratio state matrix and the error.
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "permrl/nn/matrix.hpp"
#include "permrl/permset.hpp"
#include "permrl/toydata.hpp"

namespace permrl::curriculum {

enum class Task { kSpatial, kTemporal };

std::string to_string(Task task);
/// "spatial" or "temporal"; InvalidInput otherwise.
Task task_from_string(const std::string& name);

/// |Psi| x |X_val| softmax ratios; row i belongs to permutation i.
struct NetworkStateMatrix {
  nn::Matrix ratios;
  Task task = Task::kSpatial;
};

struct PairScore {
  double ratio = 1.0;    // (p_l + 1) / (p_competitor + 1), in [0.5, 2]
  bool correct = false;  // argmax == label, ties toward the smallest index
};

/**
 * Scores one probability vector against its label. The competitor is the
 * runner-up class when the argmax is the label, otherwise the argmax. Throws
 * InvalidInput on an out-of-range label or fewer than two classes.
 */
PairScore score_pair(std::span<const double> probabilities, std::size_t label);

struct TrainRequest {
  Task task = Task::kSpatial;
  std::vector<toydata::Assignment> assignments;  // (train sample id, permutation id)
};

/// What the curriculum needs from the network being trained.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual bool has_task(Task task) const = 0;
  virtual const permset::PermutationSet& permutations(Task task) const = 0;
  virtual std::size_t train_size(Task task) const = 0;
  virtual std::size_t validation_size(Task task) const = 0;

  /// |X_val| x |Psi| class probabilities of every validation sample shuffled
  /// by permutation `perm`.
  virtual nn::Matrix validation_probabilities(Task task, std::size_t perm) const = 0;

  /// One optimizer step on the sum of the given per-task batches.
  virtual void train_step(std::span<const TrainRequest> requests) = 0;
};

struct Validation {
  NetworkStateMatrix state;
  double error = 0.0;                // 1 - mean correctness over all pairs
  std::vector<double> perm_errors;   // per-permutation error rate
  std::uint64_t forward_evaluations = 0;
};

/// Evaluates every (permutation, validation sample) pair once. Throws
/// InvalidInput when the validation set is empty or the task is absent.
Validation validate(const Learner& learner, Task task);

}  // namespace permrl::curriculum
