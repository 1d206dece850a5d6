#include "permrl/curriculum/training.hpp"

#include <algorithm>
#include <string>

#include "permrl/errors.hpp"

namespace permrl::curriculum {

namespace {

std::string task_key(const char* prefix, Task task) { return std::string(prefix) + "." + to_string(task); }

struct Groups {
  Grouping grouping;
  GroupedState grouped;
  std::vector<std::vector<std::size_t>> members;  // per action
  std::vector<std::size_t> action_of_perm;
};

Groups build_groups(const Validation& v, std::size_t n_groups, std::uint64_t seed, const KMeansOptions& kmeans) {
  Groups g;
  g.grouping = group_permutations(v.state, n_groups, seed, kmeans);
  g.grouped = aggregate_state(v.state, g.grouping);
  g.action_of_perm.assign(g.grouping.assignment.size(), 0);
  for (std::size_t j = 0; j < g.grouped.order.size(); ++j) {
    g.members.push_back(g.grouping.members(g.grouped.order[j]));
    for (std::size_t p : g.members.back()) g.action_of_perm[p] = j;
  }
  return g;
}

TrainRequest draw(Task task, std::size_t batch, std::size_t train_size, std::size_t n_perm,
                  const std::vector<std::size_t>* members, nn::Rng& samples, nn::Rng& perms,
                  std::vector<std::size_t>* perm_counts) {
  TrainRequest r;
  r.task = task;
  r.assignments.resize(batch);
  for (auto& a : r.assignments) {
    a.sample = samples.below(train_size);
    a.perm = members ? (*members)[perms.below(members->size())] : perms.below(n_perm);
    if (perm_counts) ++(*perm_counts)[a.perm];
  }
  return r;
}

policy::Mode mode_for(Selection s) { return s == Selection::kInverse ? policy::Mode::kInverse : policy::Mode::kLearned; }

}  // namespace

std::string to_string(Selection s) {
  switch (s) {
    case Selection::kPolicy:
      return "policy";
    case Selection::kRandom:
      return "random";
    case Selection::kInverse:
      return "inverse";
  }
  return "?";
}

Selection selection_from_string(const std::string& name) {
  if (name == "policy") return Selection::kPolicy;
  if (name == "random") return Selection::kRandom;
  if (name == "inverse") return Selection::kInverse;
  throw InvalidInput("unknown selection '" + name + "' (expected policy, random or inverse)");
}

std::vector<std::string> CurriculumOptions::violations() const {
  std::vector<std::string> out;
  if (n_groups < 1) out.push_back("curriculum.n_groups must be >= 1");
  if (batch < 1) out.push_back("curriculum.batch must be >= 1");
  if (kmeans.max_iterations < 1) out.push_back("curriculum.kmeans_max_iterations must be >= 1");
  if (kmeans.restarts < 1) out.push_back("curriculum.kmeans_restarts must be >= 1");
  if (!(kmeans.tolerance >= 0.0)) out.push_back("curriculum.kmeans_tolerance must be non-negative");
  return out;
}

struct TrainingRun::TaskState {
  Task task;
  policy::Policy policy;
  ErrorHistory history;
  std::int64_t next_step = 0;
  nn::Rng samples;
  nn::Rng perms;
  nn::Rng actions;
  std::uint64_t grouping_seed;
  std::optional<Groups> groups;
  std::optional<GroupedState> grouped;
  std::vector<std::size_t> free_counts;
};

TrainingRun::TrainingRun(Learner& learner, std::vector<Task> tasks, Selection selection,
                         const CurriculumOptions& options, const policy::PolicyOptions& policy_options,
                         std::uint64_t seed)
    : learner_(learner), tasks_(std::move(tasks)), selection_(selection), options_(options), seed_(seed) {
  std::vector<std::string> problems = options.violations();
  if (tasks_.empty()) problems.push_back("no task enabled");
  if (policy_options.n_groups != options.n_groups) {
    problems.push_back("policy.n_groups (" + std::to_string(policy_options.n_groups) +
                       ") must equal curriculum.n_groups (" + std::to_string(options.n_groups) + ")");
  }
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const Task t = tasks_[i];
    if (std::find(tasks_.begin(), tasks_.begin() + static_cast<std::ptrdiff_t>(i), t) !=
        tasks_.begin() + static_cast<std::ptrdiff_t>(i)) {
      problems.push_back(to_string(t) + " task listed twice");
      continue;
    }
    if (!learner.has_task(t)) {
      problems.push_back("learner has no " + to_string(t) + " task");
      continue;
    }
    if (options.n_groups > learner.permutations(t).size()) {
      problems.push_back("curriculum.n_groups (" + std::to_string(options.n_groups) + ") exceeds the " +
                         std::to_string(learner.permutations(t).size()) + " " + to_string(t) + " permutations");
    }
    if (learner.train_size(t) == 0) problems.push_back(to_string(t) + " training split is empty");
    if (learner.validation_size(t) == 0) problems.push_back(to_string(t) + " validation split is empty");
  }
  if (!problems.empty()) {
    std::string msg = "training run rejected:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InvalidInput(msg);
  }
  for (const Task t : tasks_) {
    states_.push_back(TaskState{t,
                                policy::Policy(policy_options, nn::derive_seed(seed, task_key("policy", t))),
                                {},
                                0,
                                nn::Rng(nn::derive_seed(seed, task_key("samples", t))),
                                nn::Rng(nn::derive_seed(seed, task_key("perms", t))),
                                nn::Rng(nn::derive_seed(seed, task_key("actions", t))),
                                nn::derive_seed(seed, task_key("grouping", t)),
                                std::nullopt,
                                std::nullopt,
                                std::vector<std::size_t>(learner.permutations(t).size(), 0)});
  }
}

TrainingRun::~TrainingRun() = default;

TrainingRun::TaskState& TrainingRun::state(Task task) {
  for (auto& s : states_) {
    if (s.task == task) return s;
  }
  throw InvalidInput("training run: " + to_string(task) + " task is not enabled");
}

const TrainingRun::TaskState& TrainingRun::state(Task task) const {
  return const_cast<TrainingRun*>(this)->state(task);
}

policy::Policy& TrainingRun::policy(Task task) { return state(task).policy; }
const policy::Policy& TrainingRun::policy(Task task) const { return state(task).policy; }
const ErrorHistory& TrainingRun::history(Task task) const { return state(task).history; }
const std::optional<GroupedState>& TrainingRun::grouped_state(Task task) const { return state(task).grouped; }

policy::Mode TrainingRun::sampling_mode() const { return mode_for(selection_); }

Validation TrainingRun::validate_task(TaskState& ts) {
  Validation v = validate(learner_, ts.task);
  ++counters_.validations;
  if (selection_ == Selection::kRandom) {
    counters_.monitor_forward += v.forward_evaluations;
  } else {
    counters_.validation_forward += v.forward_evaluations;
  }
  return v;
}

void TrainingRun::regroup(TaskState& ts, const Validation& v) {
  const std::uint64_t seed = nn::derive_seed(ts.grouping_seed, std::to_string(ts.next_step));
  ts.groups = build_groups(v, options_.n_groups, seed, options_.kmeans);
  ts.grouped = ts.groups->grouped;
}

TrainRequest TrainingRun::draw_batch(TaskState& ts, std::optional<std::size_t> action,
                                     std::vector<std::size_t>* perm_counts) {
  const std::vector<std::size_t>* members = action ? &ts.groups->members.at(*action) : nullptr;
  return draw(ts.task, options_.batch, learner_.train_size(ts.task), learner_.permutations(ts.task).size(), members,
              ts.samples, ts.perms, perm_counts);
}

ValidationEvent TrainingRun::make_event(const TaskState& ts, const Validation& v, const char* phase) const {
  ValidationEvent e;
  e.episode = episode_;
  e.phase = phase;
  e.task = ts.task;
  e.step = ts.history.back().step;
  e.error = v.error;
  e.group_medians = ts.grouped->medians;
  e.group_sizes = ts.grouped->sizes;
  e.selection_counts.assign(options_.n_groups, 0);
  e.perm_errors = v.perm_errors;
  e.ratio_min = v.state.ratios.minCoeff();
  e.ratio_max = v.state.ratios.maxCoeff();
  e.train_steps = counters_.train_steps;
  e.train_forward = counters_.train_forward;
  e.forward_pass_total = counters_.forward_pass_total();
  return e;
}

void TrainingRun::free_phase() {
  for (auto& ts : states_) std::fill(ts.free_counts.begin(), ts.free_counts.end(), 0);
  std::vector<TrainRequest> requests;
  for (std::size_t s = 0; s < options_.n_free; ++s) {
    requests.clear();
    for (auto& ts : states_) {
      std::optional<std::size_t> action;
      if (selection_ != Selection::kRandom && options_.free_phase_follows_policy && ts.groups) {
        const auto features = ts.grouped->features();
        action = ts.policy.sample_actions(features, 1, sampling_mode(), ts.actions).front().group;
      }
      requests.push_back(draw_batch(ts, action, &ts.free_counts));
    }
    learner_.train_step(requests);
    ++counters_.train_steps;
    counters_.train_forward += options_.batch * states_.size();
  }
}

std::vector<EpisodeRecord> TrainingRun::run_episode(TrainingObserver* observer) {
  std::vector<EpisodeRecord> records(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    TaskState& ts = states_[i];
    EpisodeRecord& rec = records[i];
    rec.episode = episode_;
    rec.task = ts.task;
    rec.selection = selection_;
    if (!ts.history.empty()) rec.previous_error = ts.history.back().error;
    const Validation v = validate_task(ts);
    regroup(ts, v);
    ts.history.append(ts.next_step++, v.error);
    rec.error = v.error;
    rec.state = ts.grouped->features();
    rec.action_of_perm = ts.groups->action_of_perm;
    rec.perm_errors = v.perm_errors;
    rec.free_perm_counts = ts.free_counts;
    rec.perm_counts.assign(v.perm_errors.size(), 0);
    rec.selection_counts.assign(options_.n_groups, 0);
    if (selection_ != Selection::kRandom) {
      rec.distribution = ts.policy.distribution(rec.state, sampling_mode());
      rec.actions = ts.policy.sample_actions(rec.state, options_.k, sampling_mode(), ts.actions);
      for (const auto& a : rec.actions) ++rec.selection_counts[a.group];
    }
    if (observer) observer->on_validation(make_event(ts, v, "pre"));
  }

  std::vector<TrainRequest> requests;
  for (std::size_t k = 0; k < options_.k; ++k) {
    requests.clear();
    for (std::size_t i = 0; i < states_.size(); ++i) {
      std::optional<std::size_t> action;
      if (!records[i].actions.empty()) action = records[i].actions[k].group;
      requests.push_back(draw_batch(states_[i], action, &records[i].perm_counts));
    }
    learner_.train_step(requests);
    ++counters_.train_steps;
    counters_.train_forward += options_.batch * states_.size();
  }

  for (std::size_t i = 0; i < states_.size(); ++i) {
    TaskState& ts = states_[i];
    EpisodeRecord& rec = records[i];
    const Validation v = validate_task(ts);
    rec.baseline = baseline_error(ts.history);
    rec.next_error = v.error;
    rec.reward = compute_reward(rec.baseline, rec.next_error);
    ts.history.append(ts.next_step++, v.error);
    if (selection_ == Selection::kPolicy) rec.update = ts.policy.reinforce_update(rec.actions, rec.reward, rec.state);
    regroup(ts, v);
    if (observer) {
      ValidationEvent e = make_event(ts, v, "post");
      e.reward = rec.reward;
      e.baseline = rec.baseline;
      e.selection_counts = rec.selection_counts;
      observer->on_validation(e);
    }
  }
  ++episode_;
  ++counters_.episodes;
  if (observer) {
    for (const auto& rec : records) observer->on_episode(rec);
  }
  return records;
}

void TrainingRun::run(TrainingObserver* observer) {
  while (episode_ < options_.episodes) {
    free_phase();
    run_episode(observer);
    const bool due = options_.checkpoint_every > 0 && episode_ % options_.checkpoint_every == 0;
    if (observer && (due || episode_ == options_.episodes)) observer->on_checkpoint(episode_, *this);
  }
}

FixedPolicyOutcome train_with_fixed_policy(Learner& learner, const std::map<Task, const policy::Policy*>& policies,
                                           policy::Mode mode, std::size_t steps, std::size_t batch,
                                           std::size_t n_groups, const KMeansOptions& kmeans, std::uint64_t seed) {
  if (batch < 1) throw InvalidInput("train_with_fixed_policy: batch must be >= 1");
  struct Lane {
    Task task;
    const policy::Policy* policy = nullptr;
    std::optional<Groups> groups;
    nn::Rng samples;
    nn::Rng perms;
    nn::Rng actions;
  };
  std::vector<Lane> lanes;
  FixedPolicyOutcome out;
  for (const Task t : {Task::kSpatial, Task::kTemporal}) {
    if (!learner.has_task(t)) continue;
    Lane lane{t,
              nullptr,
              std::nullopt,
              nn::Rng(nn::derive_seed(seed, task_key("fixed.samples", t))),
              nn::Rng(nn::derive_seed(seed, task_key("fixed.perms", t))),
              nn::Rng(nn::derive_seed(seed, task_key("fixed.actions", t)))};
    const Validation v = validate(learner, t);
    out.start_error[t] = v.error;
    const auto it = policies.find(t);
    if (it == policies.end() || it->second == nullptr) {
      throw InvalidInput("train_with_fixed_policy: no policy for the " + to_string(t) + " task");
    }
    lane.policy = it->second;
    if (lane.policy->n_groups() != n_groups) {
      throw InvalidInput("train_with_fixed_policy: policy has " + std::to_string(lane.policy->n_groups()) +
                         " groups, expected " + std::to_string(n_groups));
    }
    lane.groups = build_groups(v, n_groups, nn::derive_seed(seed, task_key("fixed.grouping", t)), kmeans);
    lanes.push_back(std::move(lane));
  }
  if (lanes.empty()) throw InvalidInput("train_with_fixed_policy: learner has no task");

  std::vector<TrainRequest> requests;
  for (std::size_t s = 0; s < steps; ++s) {
    requests.clear();
    for (auto& lane : lanes) {
      const auto features = lane.groups->grouped.features();
      const std::size_t a = lane.policy->sample_actions(features, 1, mode, lane.actions).front().group;
      const std::vector<std::size_t>* members = &lane.groups->members[a];
      requests.push_back(draw(lane.task, batch, learner.train_size(lane.task),
                              learner.permutations(lane.task).size(), members, lane.samples, lane.perms, nullptr));
    }
    learner.train_step(requests);
  }
  for (const auto& lane : lanes) out.end_error[lane.task] = validate(learner, lane.task).error;
  return out;
}

}  // namespace permrl::curriculum
