#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "permrl/curriculum/state.hpp"
#include "permrl/nn/rng.hpp"
#include "permrl/ordering_net.hpp"
#include "permrl/permset.hpp"
#include "permrl/toydata.hpp"

namespace permrl::curriculum {

ordering::Head head_of(Task task);

/// Class probabilities (samples x |Psi|) of the given samples shuffled by one
/// permutation, without jitter.
nn::Matrix ordering_probabilities(const ordering::OrderingModel& model, Task task,
                                  std::span<const toydata::Sample> samples, const permset::PermutationSet& perms,
                                  std::size_t perm);

/// Ordering error of a model on an arbitrary sample set (every permutation
/// applied to every sample).
double ordering_error(const ordering::OrderingModel& model, Task task, std::span<const toydata::Sample> samples,
                      const permset::PermutationSet& perms);

struct TaskData {
  const toydata::Dataset* data = nullptr;
  const permset::PermutationSet* perms = nullptr;
};

/// The dual-head network trained with plain SGD on jittered permuted batches.
class OrderingLearner : public Learner {
 public:
  /// Datasets, permutation sets and the model must outlive the learner.
  /// Throws InvalidInput if a task's data or permutations do not fit the model.
  OrderingLearner(ordering::OrderingModel& model, std::map<Task, TaskData> tasks, double lr, double jitter,
                  std::uint64_t augment_seed);

  bool has_task(Task task) const override { return tasks_.count(task) != 0; }
  const permset::PermutationSet& permutations(Task task) const override;
  std::size_t train_size(Task task) const override;
  std::size_t validation_size(Task task) const override;
  nn::Matrix validation_probabilities(Task task, std::size_t perm) const override;
  void train_step(std::span<const TrainRequest> requests) override;

  ordering::OrderingModel& model() noexcept { return model_; }
  double lr() const noexcept { return lr_; }

 private:
  const TaskData& data(Task task) const;

  ordering::OrderingModel& model_;
  std::map<Task, TaskData> tasks_;
  double lr_;
  double jitter_;
  nn::Rng augment_;
};

struct SyntheticOptions {
  std::size_t val_size = 100;
  std::size_t train_size = 2048;
  double learning_rate = 0.1;    // share of the excess error removed by one full batch
  double transfer = 0.1;         // neighbour gain at Hamming proximity 1
  double floor = 0.02;
  double forgetting = 0.004;     // per-step drift toward 1, scaled by difficulty
  double noise = 0.0005;         // per-step Gaussian perturbation of each error

  std::vector<std::string> violations() const;
};

/**
 * Stand-in environment with one latent error e_i per permutation. A step
 * whose batch puts share w_i on permutation i applies
 *   e_j -= lr * g_j * (e_j - floor),  g_j = w_j + transfer * sum_i w_i prox(i, j),
 * with prox = 1 - hamming / n off the diagonal, plus difficulty-weighted
 * forgetting and noise, clamped to [0, 1]. Errors start at the fixed point
 * of uniform training, so a uniform sampler sees a stationary problem. Validation compares a fixed
 * draw u per (permutation, sample), mostly shared by all permutations of a
 * sample, with e_i: the pair is correct
 * when u > e_i, and the probabilities put margin u - e_i between the label
 * and one competitor.
 */
class SyntheticLearner : public Learner {
 public:
  SyntheticLearner(Task task, permset::PermutationSet perms, const SyntheticOptions& options, std::uint64_t seed);

  bool has_task(Task task) const override { return task == task_; }
  const permset::PermutationSet& permutations(Task task) const override;
  std::size_t train_size(Task) const override { return options_.train_size; }
  std::size_t validation_size(Task) const override { return options_.val_size; }
  nn::Matrix validation_probabilities(Task task, std::size_t perm) const override;
  void train_step(std::span<const TrainRequest> requests) override;

  const std::vector<double>& latent_errors() const noexcept { return errors_; }
  const std::vector<double>& difficulty() const noexcept { return difficulty_; }
  std::uint64_t steps() const noexcept { return steps_; }

 private:
  double forgetting_rate(std::size_t perm) const { return options_.forgetting * (0.25 + 1.5 * difficulty_[perm]); }

  Task task_;
  permset::PermutationSet perms_;
  SyntheticOptions options_;
  std::vector<double> errors_;
  std::vector<double> difficulty_;
  nn::Matrix proximity_;
  nn::Matrix draws_;  // |Psi| x val_size
  nn::Rng noise_;
  std::uint64_t steps_ = 0;
};

}  // namespace permrl::curriculum
