#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "../oracles.hpp"
#include "permrl/curriculum/grouping.hpp"
#include "permrl/curriculum/ks.hpp"
#include "permrl/curriculum/learners.hpp"
#include "permrl/curriculum/reward.hpp"
#include "permrl/curriculum/state.hpp"
#include "permrl/curriculum/training.hpp"
#include "permrl/errors.hpp"
#include "permrl/permset.hpp"

using namespace permrl;
using namespace permrl::curriculum;
using nn::Matrix;

namespace {

enum class Output { kOracle, kUniform };

// Learner with scripted outputs that records what it is asked to train on.
class StubLearner : public Learner {
 public:
  StubLearner(permset::PermutationSet perms, std::size_t val, Output output)
      : perms_(std::move(perms)), val_(val), output_(output) {}

  bool has_task(Task t) const override { return t == Task::kSpatial; }
  const permset::PermutationSet& permutations(Task) const override { return perms_; }
  std::size_t train_size(Task) const override { return 500; }
  std::size_t validation_size(Task) const override { return val_; }
  Matrix validation_probabilities(Task, std::size_t perm) const override {
    const auto n = static_cast<Eigen::Index>(perms_.size());
    if (output_ == Output::kUniform) return Matrix::Constant(static_cast<Eigen::Index>(val_), n, 1.0 / double(n));
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(val_), n);
    p.col(static_cast<Eigen::Index>(perm)).setOnes();
    return p;
  }
  void train_step(std::span<const TrainRequest> requests) override {
    ++steps;
    for (const auto& r : requests) seen.push_back(r);
  }

  std::size_t steps = 0;
  std::vector<TrainRequest> seen;

 private:
  permset::PermutationSet perms_;
  std::size_t val_;
  Output output_;
};

permset::PermutationSet first_perms(std::size_t n, std::size_t count) {
  std::vector<permset::Permutation> ps;
  for (const auto& v : oracle::all_permutations(n)) {
    if (ps.size() == count) break;
    ps.emplace_back(v);
  }
  return permset::PermutationSet(n, std::move(ps), 0);
}

Matrix random_rows(Eigen::Index r, Eigen::Index c, nn::Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.5, 2.0);
  return m;
}

CurriculumOptions cadence(std::size_t groups, std::size_t n_free, std::size_t k, std::size_t batch,
                          std::size_t episodes) {
  CurriculumOptions o;
  o.n_groups = groups;
  o.n_free = n_free;
  o.k = k;
  o.batch = batch;
  o.episodes = episodes;
  return o;
}

policy::PolicyOptions policy_opts(std::size_t groups) {
  policy::PolicyOptions p;
  p.n_groups = groups;
  return p;
}

}  // namespace

TEST_CASE("score_pair") {
  const std::vector<double> p{0.7, 0.2, 0.1};
  auto s = score_pair(p, 0);
  CHECK(s.correct);
  CHECK(s.ratio == doctest::Approx(1.7 / 1.2));
  s = score_pair(p, 1);
  CHECK_FALSE(s.correct);
  CHECK(s.ratio == doctest::Approx(1.2 / 1.7));
  s = score_pair(std::vector<double>{0.0, 1.0, 0.0}, 1);
  CHECK(s.ratio == 2.0);
  s = score_pair(std::vector<double>{1.0, 0.0}, 1);
  CHECK(s.ratio == 0.5);
  // Ties go to the smallest index.
  CHECK(score_pair(std::vector<double>{0.4, 0.4, 0.2}, 0).correct);
  CHECK_FALSE(score_pair(std::vector<double>{0.4, 0.4, 0.2}, 1).correct);
  CHECK_THROWS_AS(score_pair(p, 3), InvalidInput);
  CHECK_THROWS_AS(score_pair(std::vector<double>{1.0}, 0), InvalidInput);
}

TEST_CASE("ratios stay in [0.5, 2] and exceed 1 exactly for correct pairs") {
  nn::Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> p(6);
    double sum = 0;
    for (double& v : p) sum += (v = rng.uniform() * (trial % 3 == 0 ? 10.0 : 1.0));
    for (double& v : p) v /= sum;
    const auto label = rng.below(6);
    const auto s = score_pair(p, label);
    CHECK(s.ratio >= 0.5);
    CHECK(s.ratio <= 2.0);
    CHECK((s.ratio > 1.0) == s.correct);
  }
}

TEST_CASE("validation of an oracle model") {
  StubLearner learner(permset::generate_set(4, 24, 1), 30, Output::kOracle);
  const auto v = validate(learner, Task::kSpatial);
  CHECK(v.error == 0.0);
  CHECK((v.state.ratios.array() == 2.0).all());
  CHECK(v.state.ratios.rows() == 24);
  CHECK(v.state.ratios.cols() == 30);
  CHECK(v.forward_evaluations == 24 * 30);
  for (double e : v.perm_errors) CHECK(e == 0.0);
  CHECK_THROWS_AS(validate(learner, Task::kTemporal), InvalidInput);
  StubLearner empty(permset::generate_set(4, 24, 1), 0, Output::kOracle);
  CHECK_THROWS_AS(validate(empty, Task::kSpatial), InvalidInput);
}

TEST_CASE("validation of a uniform model follows the tie rule") {
  StubLearner learner(permset::generate_set(4, 24, 1), 10, Output::kUniform);
  const auto v = validate(learner, Task::kSpatial);
  CHECK((v.state.ratios.array() == 1.0).all());
  CHECK(v.error == doctest::Approx(23.0 / 24.0).epsilon(1e-15));
  CHECK(v.perm_errors[0] == 0.0);
  CHECK(v.perm_errors[5] == 1.0);
}

TEST_CASE("validation cost at full scale") {
  StubLearner learner(first_perms(8, 1000), 100, Output::kOracle);
  const auto v = validate(learner, Task::kSpatial);
  CHECK(v.forward_evaluations == 100000);
  CHECK(static_cast<double>(v.forward_evaluations) / 128.0 == doctest::Approx(781.25));
}

TEST_CASE("k-means separates two blobs and handles k = rows") {
  Matrix rows(6, 4);
  rows.topRows(3).setConstant(2.0);
  rows.bottomRows(3).setConstant(0.5);
  const auto g = kmeans(rows, 2, 1);
  CHECK(g.assignment[0] == g.assignment[1]);
  CHECK(g.assignment[1] == g.assignment[2]);
  CHECK(g.assignment[3] == g.assignment[5]);
  CHECK(g.assignment[0] != g.assignment[3]);
  CHECK(g.objective == 0.0);

  nn::Rng rng(2);
  const Matrix r = random_rows(7, 3, rng);
  const auto single = kmeans(r, 7, 4);
  for (auto s : single.sizes) CHECK(s == 1);
  CHECK(single.objective == doctest::Approx(0.0));
  CHECK_THROWS_AS(kmeans(r, 0, 1), InvalidInput);
  CHECK_THROWS_AS(kmeans(r, 8, 1), InvalidInput);
}

TEST_CASE("k-means matches the brute-force optimum on small instances") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    nn::Rng rng(seed);
    const Matrix rows = random_rows(6, 5, rng);
    const auto g = kmeans(rows, 2, seed);
    CHECK(g.objective == doctest::Approx(oracle::brute_force_kmeans(rows, 2)).epsilon(1e-9));
    CHECK(within_group_ss(rows, g.assignment, 2) == doctest::Approx(g.objective).epsilon(1e-12));
  }
}

TEST_CASE("k-means is deterministic and never leaves a group empty") {
  nn::Rng rng(8);
  Matrix rows = random_rows(24, 10, rng);
  rows.topRows(12).setConstant(1.0);  // many duplicates stress the repair path
  for (std::size_t k : {2u, 6u, 13u}) {
    const auto a = kmeans(rows, k, 5);
    const auto b = kmeans(rows, k, 5);
    CHECK(a.assignment == b.assignment);
    CHECK(a.group_count() == k);
    for (auto s : a.sizes) CHECK(s >= 1);
    CHECK(std::accumulate(a.sizes.begin(), a.sizes.end(), std::size_t{0}) == 24);
  }
}

TEST_CASE("median") {
  CHECK(median({0.5, 1.0, 1.5, 2.0}) == 1.25);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK_THROWS_AS(median({}), InvalidInput);
}

TEST_CASE("grouped state examples") {
  NetworkStateMatrix s;
  s.ratios.resize(4, 3);
  s.ratios.row(0).setConstant(2.0);
  s.ratios.row(1).setConstant(0.5);
  s.ratios.row(2).setConstant(2.0);
  s.ratios.row(3).setConstant(0.5);
  Grouping g;
  g.assignment = {0, 1, 0, 1};
  g.sizes = {2, 2};
  const auto gs = aggregate_state(s, g);
  CHECK(gs.features() == std::vector<double>{0.5, 0.5, 0.5, 2.0});
  CHECK(gs.order == std::vector<std::size_t>{1, 0});

  s.ratios.setConstant(1.0);
  const auto tie = aggregate_state(s, g);
  CHECK(tie.order == std::vector<std::size_t>{0, 1});
  CHECK(tie.medians[0] == tie.medians[1]);

  Grouping partial;
  partial.assignment = {0, 1, 0};
  partial.sizes = {2, 1};
  CHECK_THROWS_AS(aggregate_state(s, partial), InvalidInput);
}

TEST_CASE("grouped state is invariant to row order") {
  nn::Rng rng(4);
  NetworkStateMatrix s;
  s.ratios = random_rows(12, 8, rng);
  const auto g = kmeans(s.ratios, 4, 1);
  const auto base = aggregate_state(s, g);
  double size_sum = 0;
  for (std::size_t j = 0; j < base.action_count(); ++j) {
    size_sum += base.sizes[j];
    if (j > 0) CHECK(base.medians[j - 1] <= base.medians[j]);
  }
  CHECK(std::abs(size_sum - 1.0) < 1e-12);

  std::vector<std::size_t> order(12);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(order);
    NetworkStateMatrix t;
    t.ratios.resize(12, 8);
    Grouping h;
    h.sizes = g.sizes;
    h.assignment.resize(12);
    for (std::size_t i = 0; i < 12; ++i) {
      t.ratios.row(static_cast<Eigen::Index>(i)) = s.ratios.row(static_cast<Eigen::Index>(order[i]));
      h.assignment[i] = g.assignment[order[i]];
    }
    CHECK(aggregate_state(t, h).features() == base.features());
  }
}

TEST_CASE("baseline extrapolation and reward") {
  CHECK(extrapolate_error(0.6, 0.5) == doctest::Approx(0.4));
  CHECK(extrapolate_error(0.5, 0.5) == 0.5);
  CHECK(extrapolate_error(0.9, 0.4) == 0.0);
  CHECK(extrapolate_error(0.1, 0.8) == 1.0);
  CHECK(extrapolate_error(std::nullopt, 0.3) == 0.3);
  CHECK(compute_reward(0.4, 0.35) == doctest::Approx(0.05));
  CHECK(compute_reward(0.4, 0.4) == 0.0);
  CHECK(compute_reward(0.4, 0.5) == doctest::Approx(-0.1));

  ErrorHistory h;
  CHECK_THROWS_AS(baseline_error(h), InvalidInput);
  h.append(0, 0.6);
  CHECK(baseline_error(h) == 0.6);
  h.append(1, 0.5);
  CHECK(baseline_error(h) == doctest::Approx(0.4));
  CHECK(baseline_error(h, 0) == 0.6);
  CHECK_THROWS_AS(baseline_error(h, 5), InvalidInput);
  CHECK_THROWS_AS(h.append(1, 0.2), InvalidInput);
  CHECK_THROWS_AS(h.append(2, 1.2), InvalidInput);
}

TEST_CASE("ks statistic examples") {
  const std::vector<double> a{0.1, 0.4, 0.7, 0.9};
  auto r = ks_two_sample(a, a);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
  r = ks_two_sample(a, std::vector<double>{1.5, 2.5, 3.0});
  CHECK(r.statistic == 1.0);
  std::vector<double> low, high;
  for (int i = 0; i < 10; ++i) {
    low.push_back(0.1 * i);
    high.push_back(5.0 + 0.1 * i);
  }
  r = ks_two_sample(low, high);
  CHECK(r.statistic == 1.0);
  CHECK(r.p_value < 0.01);
  CHECK_THROWS_AS(ks_two_sample(a, std::vector<double>{}), InvalidInput);
  CHECK(kolmogorov_survival(0.0) == 1.0);
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0494).epsilon(0.01));
}

TEST_CASE("ks statistic and p-value agree with direct references") {
  for (int c = 0; c < 10; ++c) {
    nn::Rng rng(100 + static_cast<std::uint64_t>(c));
    std::vector<double> a(20), b(20);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal() + 0.1 * c;
    const auto r = ks_two_sample(a, b);
    CHECK(r.statistic == doctest::Approx(oracle::ks_statistic(a, b)).epsilon(1e-12));
    CHECK(std::abs(r.p_value - oracle::ks_permutation_p(a, b, 2000, 7 + static_cast<std::uint64_t>(c))) < 0.04);
  }
}

TEST_CASE("group count diagnostic") {
  NetworkStateMatrix s;
  s.ratios.resize(4, 20);
  nn::Rng rng(1);
  for (Eigen::Index i = 0; i < s.ratios.size(); ++i) s.ratios.data()[i] = rng.uniform(0.5, 2.0);
  s.ratios.row(2) = s.ratios.row(0);
  s.ratios.row(3) = s.ratios.row(1);
  Grouping same;
  same.assignment = {0, 0, 1, 1};
  same.sizes = {2, 2};
  auto d = group_count_diagnostic(s, same, 0.01);
  CHECK(d.too_many_groups);
  CHECK(d.p_values(0, 1) == doctest::Approx(1.0));
  CHECK(d.p_values(0, 0) == 1.0);

  s.ratios.topRows(2).setConstant(0.5);
  s.ratios.bottomRows(2).setConstant(2.0);
  d = group_count_diagnostic(s, same, 0.01);
  CHECK_FALSE(d.too_many_groups);
  CHECK(d.p_values(0, 1) < 0.01);
  CHECK(d.p_values(1, 0) == d.p_values(0, 1));
}

TEST_CASE("episode bookkeeping") {
  StubLearner learner(permset::generate_set(4, 24, 1), 10, Output::kOracle);
  TrainingRun run(learner, {Task::kSpatial}, Selection::kPolicy, cadence(6, 5, 20, 32, 3), policy_opts(6), 1);
  run.free_phase();
  CHECK(learner.steps == 5);
  const auto recs = run.run_episode();
  REQUIRE(recs.size() == 1);
  const auto& r = recs[0];
  CHECK(learner.steps == 25);
  CHECK(std::accumulate(r.selection_counts.begin(), r.selection_counts.end(), std::size_t{0}) == 20);
  CHECK(std::accumulate(r.perm_counts.begin(), r.perm_counts.end(), std::size_t{0}) == 640);
  CHECK(std::accumulate(r.free_perm_counts.begin(), r.free_perm_counts.end(), std::size_t{0}) == 160);
  CHECK(run.counters().train_forward == 25 * 32);
  CHECK(run.counters().validation_forward == 2 * 24 * 10);
  CHECK(r.actions.size() == 20);
  CHECK(r.update.has_value());
  CHECK(r.reward == r.baseline - r.next_error);
  // Every permutation drawn in the episode belongs to the group of its action.
  for (std::size_t k = 0; k < 20; ++k) {
    for (const auto& a : learner.seen[5 + k].assignments) CHECK(r.action_of_perm[a.perm] == r.actions[k].group);
  }
}

TEST_CASE("episodes without steps") {
  StubLearner learner(permset::generate_set(4, 24, 1), 10, Output::kUniform);
  TrainingRun run(learner, {Task::kSpatial}, Selection::kPolicy, cadence(4, 0, 0, 8, 2), policy_opts(4), 1);
  const auto first = run.run_episode();
  CHECK(learner.steps == 0);
  CHECK(first[0].reward == 0.0);
  CHECK_FALSE(first[0].previous_error.has_value());
  const auto second = run.run_episode();
  REQUIRE(second[0].previous_error.has_value());
  CHECK(second[0].reward == doctest::Approx(0.0));
}

TEST_CASE("random selection ignores the policy") {
  StubLearner learner(permset::generate_set(4, 24, 1), 10, Output::kOracle);
  TrainingRun run(learner, {Task::kSpatial}, Selection::kRandom, cadence(6, 0, 4, 8, 1), policy_opts(6), 1);
  const auto r = run.run_episode();
  CHECK(r[0].actions.empty());
  CHECK_FALSE(r[0].update.has_value());
  CHECK(run.counters().validation_forward == 0);
  CHECK(run.counters().monitor_forward == 2 * 24 * 10);
}

TEST_CASE("inconsistent runs are rejected") {
  StubLearner learner(permset::generate_set(4, 10, 1), 10, Output::kOracle);
  CHECK_THROWS_AS(TrainingRun(learner, {Task::kSpatial}, Selection::kPolicy, cadence(12, 0, 1, 4, 1), policy_opts(12), 1),
                  InvalidInput);
  CHECK_THROWS_AS(TrainingRun(learner, {Task::kTemporal}, Selection::kPolicy, cadence(2, 0, 1, 4, 1), policy_opts(2), 1),
                  InvalidInput);
  CHECK_THROWS_AS(TrainingRun(learner, {Task::kSpatial}, Selection::kPolicy, cadence(2, 0, 1, 4, 1), policy_opts(3), 1),
                  InvalidInput);
}

TEST_CASE("training runs are deterministic") {
  auto run_once = [] {
    SyntheticOptions so;
    SyntheticLearner learner(Task::kSpatial, permset::generate_set(4, 24, 1), so, 3);
    TrainingRun run(learner, {Task::kSpatial}, Selection::kPolicy, cadence(6, 5, 10, 16, 6), policy_opts(6), 9);
    std::vector<double> trace;
    for (int ep = 0; ep < 6; ++ep) {
      run.free_phase();
      for (const auto& r : run.run_episode()) {
        trace.push_back(r.reward);
        for (const auto& a : r.actions) trace.push_back(static_cast<double>(a.group));
      }
    }
    return trace;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("synthetic learner keeps errors in range and rewards practice") {
  SyntheticOptions so;
  const auto perms = permset::generate_set(4, 24, 2);
  SyntheticLearner learner(Task::kSpatial, perms, so, 5);
  for (double e : learner.latent_errors()) {
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
  const auto v = validate(learner, Task::kSpatial);
  CHECK(v.state.ratios.minCoeff() >= 0.5);
  CHECK(v.state.ratios.maxCoeff() <= 2.0);

  // Train only the hardest group; its error must fall faster than any other's.
  const auto g = group_permutations(v.state, 6, 1);
  const auto gs = aggregate_state(v.state, g);
  const auto hardest = g.members(gs.order.front());
  const auto before = learner.latent_errors();
  nn::Rng rng(1);
  for (int step = 0; step < 50; ++step) {
    TrainRequest r;
    for (int b = 0; b < 32; ++b) r.assignments.push_back({rng.below(100), hardest[rng.below(hardest.size())]});
    learner.train_step(std::vector<TrainRequest>{r});
  }
  std::vector<double> drop(6, 0.0);
  for (std::size_t a = 0; a < 6; ++a) {
    const auto members = g.members(gs.order[a]);
    for (auto p : members) drop[a] += (before[p] - learner.latent_errors()[p]) / double(members.size());
  }
  for (std::size_t a = 1; a < 6; ++a) CHECK(drop[0] > drop[a]);
  for (double e : learner.latent_errors()) {
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
}

TEST_CASE("policy on the synthetic environment prefers the hardest group and stays stochastic") {
  double hardest_share = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticOptions so;
    SyntheticLearner learner(Task::kSpatial, permset::generate_set(4, 24, seed), so, seed);
    TrainingRun run(learner, {Task::kSpatial}, Selection::kPolicy, cadence(6, 0, 20, 32, 100), policy_opts(6), seed);
    double min_pi = 1.0;
    for (int ep = 0; ep < 100; ++ep) {
      run.free_phase();
      const auto r = run.run_episode()[0];
      min_pi = std::min(min_pi, *std::min_element(r.distribution.begin(), r.distribution.end()));
      if (ep >= 50) hardest_share += r.distribution[0] / 250.0;
    }
    CHECK(min_pi > 1e-4);
  }
  MESSAGE("mean hardest-group probability after 50 episodes " << hardest_share);
  CHECK(hardest_share > 1.0 / 6.0);
}

TEST_CASE("fixed-policy training shares sample draws across modes") {
  std::vector<std::vector<std::size_t>> samples;
  for (auto mode : {policy::Mode::kLearned, policy::Mode::kUniform, policy::Mode::kInverse}) {
    StubLearner learner(permset::generate_set(4, 24, 1), 10, Output::kOracle);
    policy::Policy p(policy_opts(6), 3);
    const auto out = train_with_fixed_policy(learner, {{Task::kSpatial, &p}}, mode, 7, 8, 6, {}, 11);
    CHECK(learner.steps == 7);
    CHECK(out.start_error.at(Task::kSpatial) == 0.0);
    std::vector<std::size_t> ids;
    for (const auto& r : learner.seen)
      for (const auto& a : r.assignments) ids.push_back(a.sample);
    samples.push_back(ids);
  }
  CHECK(samples[0] == samples[1]);
  CHECK(samples[1] == samples[2]);
}
