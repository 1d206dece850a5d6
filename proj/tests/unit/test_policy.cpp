#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "permrl/errors.hpp"
#include "permrl/nn/grad_check.hpp"
#include "permrl/policy.hpp"

using namespace permrl;
using namespace permrl::policy;

namespace {

PolicyOptions opts(std::size_t groups, double beta = 0.01) {
  PolicyOptions o;
  o.n_groups = groups;
  o.beta = beta;
  return o;
}

std::vector<double> state_for(std::size_t groups, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<double> s(2 * groups);
  for (std::size_t j = 0; j < groups; ++j) {
    s[2 * j] = 1.0 / static_cast<double>(groups);
    s[2 * j + 1] = rng.uniform(0.5, 2.0);
  }
  return s;
}

// Random hidden and output weights so the distribution is far from uniform.
void randomize(Policy& p, std::uint64_t seed) {
  nn::Rng rng(seed);
  for (auto& t : p.params())
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = rng.uniform(-1, 1);
}

}  // namespace

TEST_CASE("options and modes") {
  CHECK(PolicyOptions{}.violations().empty());
  PolicyOptions bad;
  bad.n_groups = 0;
  CHECK_FALSE(bad.violations().empty());
  CHECK(mode_from_string("inverse") == Mode::kInverse);
  CHECK(to_string(Mode::kUniform) == "uniform");
  CHECK_THROWS_AS(mode_from_string("greedy"), InvalidInput);
}

TEST_CASE("zero parameters give the uniform distribution") {
  Policy p(opts(10), 1);
  for (auto& t : p.params()) t.value.setZero();
  const auto pi = p.forward(state_for(10, 3));
  double sum = 0;
  for (double v : pi) {
    CHECK(v == doctest::Approx(0.1).epsilon(1e-12));
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
  double h = 0;
  for (double v : pi) h -= v * std::log(v);
  CHECK(h == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK_THROWS_AS(p.forward(std::vector<double>(7, 0.0)), InvalidInput);
}

TEST_CASE("fresh policies start uniform") {
  Policy p(opts(6), 42);
  for (double v : p.forward(state_for(6, 1))) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("forward output is a distribution for extreme inputs") {
  Policy p(opts(4), 1);
  randomize(p, 2);
  for (double scale : {0.0, 1.0, 1e3, 1e6}) {
    std::vector<double> s(8, scale);
    const auto pi = p.forward(s);
    double sum = 0;
    for (double v : pi) {
      CHECK(v >= 0.0);
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("inverse distribution") {
  const auto q = inverse_distribution(std::vector<double>{0.9, 0.1});
  CHECK(q[0] == doctest::Approx(0.1));
  CHECK(q[1] == doctest::Approx(0.9));
  CHECK(inverse_distribution(std::vector<double>{1.0})[0] == 1.0);
  const auto r = inverse_distribution(std::vector<double>{0.5, 0.3, 0.2});
  CHECK(r[0] == doctest::Approx(0.25));
  CHECK(r[2] == doctest::Approx(0.4));
}

TEST_CASE("sampling modes") {
  Policy p(opts(10), 1);
  randomize(p, 5);
  const auto s = state_for(10, 2);
  nn::Rng rng(7);
  CHECK(p.sample_actions(s, 0, Mode::kLearned, rng).empty());

  const auto draws = p.sample_actions(s, 10000, Mode::kUniform, rng);
  std::vector<double> freq(10, 0);
  for (const auto& a : draws) {
    freq[a.group] += 1.0 / 10000;
    CHECK(a.mode == Mode::kUniform);
    CHECK(a.log_prob == doctest::Approx(std::log(0.1)));
  }
  for (double f : freq) CHECK(std::abs(f - 0.1) < 0.02);

  for (Mode m : {Mode::kLearned, Mode::kInverse}) {
    const auto dist = p.distribution(s, m);
    for (const auto& a : p.sample_actions(s, 50, m, rng)) {
      CHECK(a.group < 10);
      CHECK(a.log_prob <= 0.0);
      CHECK(a.log_prob == doctest::Approx(std::log(dist[a.group])).epsilon(1e-12));
    }
  }
  const auto pi = p.forward(s);
  const auto q = p.distribution(s, Mode::kInverse);
  for (std::size_t j = 0; j < 10; ++j) CHECK(q[j] == doctest::Approx((1 - pi[j]) / 9));
}

TEST_CASE("objective gradient agrees with finite differences") {
  // Five-point stencil over every coordinate; random output weights on top of
  // the regular hidden initialization.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Policy p(opts(5, 0.05), seed);
    nn::Rng rng(9 + seed);
    for (auto& t : p.params())
      if (t.name.find("output") != std::string::npos)
        for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = rng.uniform(-1, 1);
    const auto s = state_for(5, 4 + seed);
    nn::Rng draw(3);
    const auto actions = p.sample_actions(s, 6, Mode::kLearned, draw);

    p.params().zero_grad();
    p.objective(actions, 0.7, s, true);
    std::vector<nn::Matrix> analytic;
    for (const auto& t : p.params()) analytic.push_back(t.grad);
    p.params().zero_grad();

    const double h = 1e-3;
    double worst = 0;
    std::size_t k = 0;
    for (auto& t : p.params()) {
      for (Eigen::Index i = 0; i < t.value.size(); ++i) {
        double& w = t.value.data()[i];
        const double w0 = w;
        auto f = [&](double d) {
          w = w0 + d;
          return p.objective(actions, 0.7, s, false);
        };
        // The store holds the gradient of -J.
        const double numeric = -(-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
        w = w0;
        const double a = analytic[k].data()[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4}));
      }
      ++k;
    }
    INFO("seed " << seed);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("objective matches its definition") {
  Policy p(opts(4, 0.2), 1);
  randomize(p, 10);
  const auto s = state_for(4, 5);
  nn::Rng rng(1);
  const auto actions = p.sample_actions(s, 3, Mode::kLearned, rng);
  const auto pi = p.forward(s);
  double expected = 0;
  for (const auto& a : actions) expected += -0.4 * std::log(pi[a.group]);
  for (double v : pi) expected += 0.2 * -v * std::log(v);
  CHECK(p.objective(actions, -0.4, s, false) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("update direction follows the advantage sign") {
  const auto s = state_for(4, 6);
  for (double reward : {0.5, -0.5}) {
    Policy p(opts(4, 0.0), 3);
    randomize(p, 11);
    const double before = p.forward(s)[2];
    const std::vector<ActionSample> a{{2, std::log(before), Mode::kLearned}};
    const auto d = p.reinforce_update(a, reward, s);
    CHECK(d.advantage == reward);
    const double after = p.forward(s)[2];
    CHECK((after - before) * reward > 0.0);
    CHECK(d.baseline_after == doctest::Approx(0.1 * reward));
  }
}

TEST_CASE("zero advantage without entropy leaves parameters unchanged") {
  Policy p(opts(4, 0.0), 3);
  randomize(p, 12);
  const auto s = state_for(4, 7);
  std::vector<nn::Matrix> before;
  for (const auto& t : p.params()) before.push_back(t.value);
  const std::vector<ActionSample> a{{1, std::log(0.25), Mode::kLearned}};
  p.reinforce_update(a, 0.0, s);
  std::size_t i = 0;
  for (const auto& t : p.params()) CHECK(t.value == before[i++]);
}

TEST_CASE("baseline is a moving average of rewards") {
  Policy p(opts(3), 1);
  const auto s = state_for(3, 1);
  const std::vector<ActionSample> a{{0, std::log(1.0 / 3), Mode::kLearned}};
  double b = 0;
  for (double r : {0.2, -0.1, 0.05, 0.3}) {
    const auto d = p.reinforce_update(a, r, s);
    CHECK(d.baseline_before == doctest::Approx(b));
    CHECK(d.advantage == doctest::Approx(r - b));
    b = 0.9 * b + 0.1 * r;
    CHECK(p.baseline() == doctest::Approx(b));
  }
  CHECK(p.updates() == 4);
  const std::vector<ActionSample> wrong{{0, std::log(1.0 / 3), Mode::kUniform}};
  CHECK_THROWS_AS(p.reinforce_update(wrong, 0.1, s), InvalidInput);
}

TEST_CASE("identical seeds give identical action streams and updates") {
  auto run = [] {
    Policy p(opts(5), 8);
    nn::Rng rng(4);
    std::vector<std::size_t> groups;
    for (int ep = 0; ep < 10; ++ep) {
      const auto s = state_for(5, static_cast<std::uint64_t>(ep));
      const auto a = p.sample_actions(s, 4, Mode::kLearned, rng);
      for (const auto& x : a) groups.push_back(x.group);
      p.reinforce_update(a, 0.1 * ep - 0.3, s);
    }
    return std::make_pair(groups, p.forward(state_for(5, 99)));
  };
  CHECK(run() == run());
}

TEST_CASE("save and load keep parameters and baseline") {
  Policy p(opts(4), 2);
  randomize(p, 13);
  const auto s = state_for(4, 2);
  const std::vector<ActionSample> a{{1, std::log(0.25), Mode::kLearned}};
  p.reinforce_update(a, 0.4, s);
  auto dir = std::filesystem::temp_directory_path() / "permrl_unit";
  std::filesystem::create_directories(dir);
  p.save(dir / "policy.ckpt");
  Policy q(opts(4), 99);
  q.load(dir / "policy.ckpt");
  CHECK(q.baseline() == p.baseline());
  CHECK(q.forward(s) == p.forward(s));
}
