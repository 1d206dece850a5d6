#pragma once

/**
 * @file training.hpp
 * @brief Alternating self-supervised training and policy episodes.
 *
 * For each of T episodes:
 *   1. n_free plain steps with uniformly drawn permutations, or, with
 *      free_phase_follows_policy, one group per batch from the (fixed)
 *      policy over the latest grouped state;
 *   2. validation -> state matrix, grouping, grouped state, E_t;
 *   3. K policy-chosen batches, one learner step each;
 *   4. validation -> E_{t+1}, reward, policy update.
 * Each enabled task has its own policy, grouping and error history; one
 * learner step serves all tasks.
 */

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "permrl/curriculum/grouping.hpp"
#include "permrl/curriculum/reward.hpp"
#include "permrl/curriculum/state.hpp"
#include "permrl/nn/rng.hpp"
#include "permrl/policy.hpp"

namespace permrl::curriculum {

enum class Selection { kPolicy, kRandom, kInverse };

std::string to_string(Selection s);
/// "policy", "random" or "inverse"; InvalidInput otherwise.
Selection selection_from_string(const std::string& name);

struct CurriculumOptions {
  std::size_t n_groups = 6;
  std::size_t n_free = 200;
  std::size_t k = 20;
  std::size_t batch = 32;
  std::size_t episodes = 90;
  bool free_phase_follows_policy = false;
  std::size_t checkpoint_every = 10;  // episodes; 0 disables
  KMeansOptions kmeans;

  std::vector<std::string> violations() const;
  bool operator==(const CurriculumOptions& o) const {
    return n_groups == o.n_groups && n_free == o.n_free && k == o.k && batch == o.batch && episodes == o.episodes &&
           free_phase_follows_policy == o.free_phase_follows_policy && checkpoint_every == o.checkpoint_every &&
           kmeans.max_iterations == o.kmeans.max_iterations && kmeans.tolerance == o.kmeans.tolerance &&
           kmeans.restarts == o.kmeans.restarts;
  }
};

struct Counters {
  std::uint64_t train_steps = 0;
  std::uint64_t train_forward = 0;       // permuted samples consumed by training steps
  std::uint64_t validation_forward = 0;  // evaluations the curriculum needs
  std::uint64_t monitor_forward = 0;     // evaluations made only for logging (random selection)
  std::uint64_t validations = 0;
  std::uint64_t episodes = 0;

  std::uint64_t forward_pass_total() const noexcept { return train_forward + validation_forward; }
};

struct ValidationEvent {
  std::size_t episode = 0;
  std::string phase;  // "pre" or "post"
  Task task = Task::kSpatial;
  std::int64_t step = 0;  // per-task validation index
  double error = 0.0;
  std::optional<double> reward;
  std::optional<double> baseline;
  std::vector<double> group_medians;
  std::vector<double> group_sizes;
  std::vector<std::size_t> selection_counts;
  std::vector<double> perm_errors;
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  std::uint64_t train_steps = 0;
  std::uint64_t train_forward = 0;
  std::uint64_t forward_pass_total = 0;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  Task task = Task::kSpatial;
  Selection selection = Selection::kPolicy;
  std::vector<double> state;                 // grouped state the actions were drawn from
  std::vector<std::size_t> action_of_perm;   // permutation -> action index
  std::vector<double> distribution;          // distribution actually sampled (empty for random)
  std::vector<policy::ActionSample> actions;
  std::vector<std::size_t> selection_counts; // per action, sums to K
  std::vector<std::size_t> perm_counts;      // permutations drawn during the K steps
  std::vector<std::size_t> free_perm_counts; // permutations drawn in the preceding free phase
  std::vector<double> perm_errors;           // at the pre-episode validation
  std::optional<double> previous_error;      // E_{t-1}
  double error = 0.0;                        // E_t
  double baseline = 0.0;                     // E^BL_{t+1}
  double next_error = 0.0;                   // E_{t+1}
  double reward = 0.0;
  std::optional<policy::UpdateDiagnostics> update;
};

class TrainingRun;

class TrainingObserver {
 public:
  virtual ~TrainingObserver() = default;
  virtual void on_validation(const ValidationEvent&) {}
  virtual void on_episode(const EpisodeRecord&) {}
  /// Called after every checkpoint_every-th episode and after the last one.
  virtual void on_checkpoint(std::size_t /*episodes_done*/, const TrainingRun&) {}
};

class TrainingRun {
 public:
  /// Throws InvalidInput when the options are inconsistent with the learner
  /// (missing task, more groups than permutations, ...).
  TrainingRun(Learner& learner, std::vector<Task> tasks, Selection selection, const CurriculumOptions& options,
              const policy::PolicyOptions& policy_options, std::uint64_t seed);
  ~TrainingRun();

  /// All remaining episodes.
  void run(TrainingObserver* observer = nullptr);

  /// n_free steps.
  void free_phase();
  /// Validation, K steps, validation, policy update; one record per task.
  std::vector<EpisodeRecord> run_episode(TrainingObserver* observer = nullptr);

  const std::vector<Task>& tasks() const noexcept { return tasks_; }
  Selection selection() const noexcept { return selection_; }
  const CurriculumOptions& options() const noexcept { return options_; }
  const Counters& counters() const noexcept { return counters_; }
  std::size_t episodes_done() const noexcept { return episode_; }
  policy::Policy& policy(Task task);
  const policy::Policy& policy(Task task) const;
  const ErrorHistory& history(Task task) const;
  /// Newest grouped state of a task, if any validation happened.
  const std::optional<GroupedState>& grouped_state(Task task) const;

 private:
  struct TaskState;

  TaskState& state(Task task);
  const TaskState& state(Task task) const;
  Validation validate_task(TaskState& ts);
  void regroup(TaskState& ts, const Validation& v);
  TrainRequest draw_batch(TaskState& ts, std::optional<std::size_t> action, std::vector<std::size_t>* perm_counts);
  policy::Mode sampling_mode() const;
  ValidationEvent make_event(const TaskState& ts, const Validation& v, const char* phase) const;

  Learner& learner_;
  std::vector<Task> tasks_;
  Selection selection_;
  CurriculumOptions options_;
  std::uint64_t seed_;
  std::vector<TaskState> states_;
  Counters counters_;
  std::size_t episode_ = 0;
};

struct FixedPolicyOutcome {
  std::map<Task, double> start_error;
  std::map<Task, double> end_error;
};

/**
 * Trains `steps` batches with a frozen policy sampled in the given mode
 * (learned, uniform over groups, or inverse): validates once to build each
 * task's grouped state, draws one group per batch, then validates again.
 * Used to compare selection modes from a shared checkpoint. Sample draws
 * depend only on `seed`, so modes see the same training samples.
 */
FixedPolicyOutcome train_with_fixed_policy(Learner& learner, const std::map<Task, const policy::Policy*>& policies,
                                           policy::Mode mode, std::size_t steps, std::size_t batch,
                                           std::size_t n_groups, const KMeansOptions& kmeans, std::uint64_t seed);

}  // namespace permrl::curriculum
