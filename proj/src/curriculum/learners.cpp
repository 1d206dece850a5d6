#include "permrl/curriculum/learners.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "permrl/errors.hpp"
#include "permrl/nn/loss.hpp"

namespace permrl::curriculum {

namespace {

using nn::Matrix;

std::vector<toydata::Assignment> all_with_perm(std::size_t n, std::size_t perm) {
  std::vector<toydata::Assignment> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = {i, perm};
  return a;
}

}  // namespace

ordering::Head head_of(Task task) { return task == Task::kSpatial ? ordering::Head::kSpatial : ordering::Head::kTemporal; }

Matrix ordering_probabilities(const ordering::OrderingModel& model, Task task, std::span<const toydata::Sample> samples,
                              const permset::PermutationSet& perms, std::size_t perm) {
  const auto assignments = all_with_perm(samples.size(), perm);
  const auto batch = toydata::make_permuted_batch(samples, perms, assignments);
  return nn::softmax_rows(model.forward(head_of(task), batch.inputs));
}

double ordering_error(const ordering::OrderingModel& model, Task task, std::span<const toydata::Sample> samples,
                      const permset::PermutationSet& perms) {
  if (samples.empty()) throw InvalidInput("ordering_error: empty sample set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < perms.size(); ++i) {
    const Matrix p = ordering_probabilities(model, task, samples, perms, i);
    for (Eigen::Index x = 0; x < p.rows(); ++x) {
      const auto row = p.row(x);
      correct += score_pair(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), i).correct;
    }
  }
  return 1.0 - static_cast<double>(correct) / static_cast<double>(perms.size() * samples.size());
}

OrderingLearner::OrderingLearner(ordering::OrderingModel& model, std::map<Task, TaskData> tasks, double lr,
                                 double jitter, std::uint64_t augment_seed)
    : model_(model), tasks_(std::move(tasks)), lr_(lr), jitter_(jitter), augment_(augment_seed) {
  if (tasks_.empty()) throw InvalidInput("ordering learner: no task enabled");
  if (!(lr > 0.0)) throw InvalidInput("ordering learner: learning rate must be positive");
  if (!(jitter >= 0.0)) throw InvalidInput("ordering learner: jitter must be non-negative");
  const auto& c = model.config();
  for (const auto& [task, td] : tasks_) {
    if (td.data == nullptr || td.perms == nullptr) {
      throw InvalidInput("ordering learner: " + to_string(task) + " task lacks data or permutations");
    }
    const std::size_t parts = task == Task::kSpatial ? c.n_tiles : c.n_frames;
    const std::size_t classes = task == Task::kSpatial ? c.n_perm_spatial : c.n_perm_temporal;
    if (td.data->spec.parts() != parts || td.perms->n() != parts) {
      throw InvalidInput("ordering learner: " + to_string(task) + " data has " +
                         std::to_string(td.data->spec.parts()) + " parts, permutations act on " +
                         std::to_string(td.perms->n()) + ", model expects " + std::to_string(parts));
    }
    if (td.perms->size() != classes) {
      throw InvalidInput("ordering learner: " + to_string(task) + " permutation set has " +
                         std::to_string(td.perms->size()) + " entries, classifier has " + std::to_string(classes));
    }
  }
}

const TaskData& OrderingLearner::data(Task task) const {
  const auto it = tasks_.find(task);
  if (it == tasks_.end()) throw InvalidInput("ordering learner: " + to_string(task) + " task is not enabled");
  return it->second;
}

const permset::PermutationSet& OrderingLearner::permutations(Task task) const { return *data(task).perms; }
std::size_t OrderingLearner::train_size(Task task) const { return data(task).data->train.size(); }
std::size_t OrderingLearner::validation_size(Task task) const { return data(task).data->val.size(); }

Matrix OrderingLearner::validation_probabilities(Task task, std::size_t perm) const {
  const auto& td = data(task);
  return ordering_probabilities(model_, task, td.data->val, *td.perms, perm);
}

void OrderingLearner::train_step(std::span<const TrainRequest> requests) {
  std::optional<toydata::PermutedBatch> spatial;
  std::optional<toydata::PermutedBatch> temporal;
  for (const auto& r : requests) {
    auto& slot = r.task == Task::kSpatial ? spatial : temporal;
    if (slot) throw InvalidInput("ordering learner: two batches for the " + to_string(r.task) + " task in one step");
    const auto& td = data(r.task);
    slot = toydata::make_permuted_batch(td.data->train, *td.perms, r.assignments, jitter_, &augment_);
  }
  ordering::TaskBatch sb;
  ordering::TaskBatch tb;
  if (spatial) sb = {&spatial->inputs, spatial->labels};
  if (temporal) tb = {&temporal->inputs, temporal->labels};
  model_.train_step_dual(sb, tb, lr_);
}

std::vector<std::string> SyntheticOptions::violations() const {
  std::vector<std::string> out;
  if (val_size < 1) out.push_back("synthetic.val_size must be >= 1");
  if (train_size < 1) out.push_back("synthetic.train_size must be >= 1");
  if (!(0.0 <= floor && floor < 1.0)) out.push_back("synthetic.floor must lie in [0, 1)");
  if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) out.push_back("synthetic.learning_rate must lie in [0, 1]");
  if (!(transfer >= 0.0)) out.push_back("synthetic.transfer must be non-negative");
  if (!(forgetting >= 0.0 && noise >= 0.0)) out.push_back("synthetic.forgetting and noise must be non-negative");
  return out;
}

SyntheticLearner::SyntheticLearner(Task task, permset::PermutationSet perms, const SyntheticOptions& options,
                                   std::uint64_t seed)
    : task_(task), perms_(std::move(perms)), options_(options), noise_(nn::derive_seed(seed, "synthetic.noise")) {
  if (const auto v = options.violations(); !v.empty()) {
    std::string msg = "invalid synthetic learner options:";
    for (const auto& s : v) msg += "\n  " + s;
    throw InvalidInput(msg);
  }
  if (perms_.size() < 2) throw InvalidInput("synthetic learner: need at least two permutations");
  const std::size_t n = perms_.size();
  nn::Rng init(nn::derive_seed(seed, "synthetic.init"));
  errors_.resize(n);
  difficulty_.resize(n);
  for (double& d : difficulty_) d = init.uniform();
  proximity_ = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double len = static_cast<double>(perms_.n());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double prox = 1.0 - static_cast<double>(permset::hamming(perms_[i], perms_[j])) / len;
      proximity_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = options_.transfer * prox;
    }
  }
  const Eigen::RowVectorXd uniform_gain =
      Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)) * proximity_;
  for (std::size_t j = 0; j < n; ++j) {
    const double learn = options_.learning_rate * std::min(1.0, uniform_gain(static_cast<Eigen::Index>(j)));
    const double forget = forgetting_rate(j);
    errors_[j] = learn + forget > 0.0 ? (learn * options_.floor + forget) / (learn + forget) : 1.0;
  }
  nn::Rng draws(nn::derive_seed(seed, "synthetic.validation"));
  draws_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(options_.val_size));
  // Sample difficulty is mostly shared across permutations, as it is for a
  // real network; the remainder is per pair.
  std::vector<double> shared(options_.val_size);
  for (double& u : shared) u = draws.uniform();
  for (Eigen::Index i = 0; i < draws_.rows(); ++i) {
    for (Eigen::Index x = 0; x < draws_.cols(); ++x) {
      draws_(i, x) = (shared[static_cast<std::size_t>(x)] + 0.25 * draws.uniform()) / 1.25;
    }
  }
}

const permset::PermutationSet& SyntheticLearner::permutations(Task task) const {
  if (task != task_) throw InvalidInput("synthetic learner: " + to_string(task) + " task is not enabled");
  return perms_;
}

Matrix SyntheticLearner::validation_probabilities(Task task, std::size_t perm) const {
  const std::size_t n = permutations(task).size();
  if (perm >= n) throw InvalidInput("synthetic learner: permutation " + std::to_string(perm) + " out of range");
  const double spread = n > 2 ? 1e-3 : 0.0;
  const std::size_t competitor = (perm + 1) % n;
  Matrix p(static_cast<Eigen::Index>(options_.val_size), static_cast<Eigen::Index>(n));
  p.setConstant(n > 2 ? spread / static_cast<double>(n - 2) : 0.0);
  for (std::size_t x = 0; x < options_.val_size; ++x) {
    const auto r = static_cast<Eigen::Index>(x);
    const double margin = draws_(static_cast<Eigen::Index>(perm), r) - errors_[perm];
    p(r, static_cast<Eigen::Index>(perm)) = (1.0 - spread) * 0.5 * (1.0 + margin);
    p(r, static_cast<Eigen::Index>(competitor)) = (1.0 - spread) * 0.5 * (1.0 - margin);
  }
  return p;
}

void SyntheticLearner::train_step(std::span<const TrainRequest> requests) {
  const std::size_t n = perms_.size();
  Eigen::RowVectorXd share = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
  std::size_t total = 0;
  for (const auto& r : requests) {
    if (r.task != task_) throw InvalidInput("synthetic learner: " + to_string(r.task) + " task is not enabled");
    for (const auto& a : r.assignments) {
      if (a.perm >= n) throw InvalidInput("synthetic learner: permutation " + std::to_string(a.perm) + " out of range");
      share(static_cast<Eigen::Index>(a.perm)) += 1.0;
      ++total;
    }
  }
  if (total > 0) share /= static_cast<double>(total);
  const Eigen::RowVectorXd gain = share * proximity_;
  for (std::size_t j = 0; j < n; ++j) {
    double e = errors_[j];
    e -= options_.learning_rate * std::min(1.0, gain(static_cast<Eigen::Index>(j))) * std::max(0.0, e - options_.floor);
    e += forgetting_rate(j) * (1.0 - e);
    e += options_.noise * noise_.normal();
    errors_[j] = std::clamp(e, 0.0, 1.0);
  }
  ++steps_;
}

}  // namespace permrl::curriculum
