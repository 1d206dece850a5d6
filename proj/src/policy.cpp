#include "permrl/policy.hpp"

#include <cmath>

#include "permrl/errors.hpp"
#include "permrl/nn/loss.hpp"

namespace permrl::policy {

namespace {

using nn::Matrix;

constexpr const char* kBaselineTensor = "policy.baseline";

Matrix as_row(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

std::vector<double> log_softmax(const Matrix& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = logits(0, static_cast<Eigen::Index>(j)) - lse;
  return out;
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kLearned:
      return "learned";
    case Mode::kUniform:
      return "uniform";
    case Mode::kInverse:
      return "inverse";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  if (name == "learned") return Mode::kLearned;
  if (name == "uniform") return Mode::kUniform;
  if (name == "inverse") return Mode::kInverse;
  throw InvalidInput("unknown policy mode '" + name + "' (expected learned, uniform or inverse)");
}

std::vector<std::string> PolicyOptions::violations() const {
  std::vector<std::string> out;
  if (n_groups < 1) out.push_back("policy.n_groups must be >= 1");
  if (hidden < 1) out.push_back("policy.hidden must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) out.push_back("policy.lr must be a positive finite number");
  if (!(gamma >= 0.0 && gamma <= 1.0)) out.push_back("policy.gamma must lie in [0, 1]");
  if (!(rho >= 0.0 && rho < 1.0)) out.push_back("policy.rho must lie in [0, 1)");
  if (!(beta >= 0.0) || !std::isfinite(beta)) out.push_back("policy.beta must be a non-negative finite number");
  return out;
}

std::vector<double> inverse_distribution(std::span<const double> p) {
  if (p.empty()) throw InvalidInput("inverse_distribution: empty distribution");
  if (p.size() == 1) return {1.0};
  std::vector<double> q(p.size());
  const double norm = static_cast<double>(p.size() - 1);
  for (std::size_t j = 0; j < p.size(); ++j) q[j] = (1.0 - p[j]) / norm;
  return q;
}

Policy::Policy(const PolicyOptions& options, std::uint64_t seed) : options_(options) {
  if (const auto v = options.violations(); !v.empty()) {
    std::string msg = "invalid policy options:";
    for (const auto& s : v) msg += "\n  " + s;
    throw InvalidInput(msg);
  }
  nn::Rng rng(nn::derive_seed(seed, "policy.init"));
  const auto in = static_cast<Eigen::Index>(input_width());
  const auto hid = static_cast<Eigen::Index>(options_.hidden);
  const auto out = static_cast<Eigen::Index>(options_.n_groups);
  hidden_ = nn::Dense(store_, "policy.hidden", in, hid, nn::Activation::kTanh, rng);
  output_ = nn::Dense(store_, "policy.output", hid, out, nn::Activation::kLinear, rng);
  // Start from the uniform distribution; the hidden layer stays random so
  // the first updates already have distinct features to work with.
  store_.value(output_.weight()).setZero();
}

void Policy::check_state(std::span<const double> state) const {
  if (state.size() != input_width()) {
    throw InvalidInput("policy: state width " + std::to_string(state.size()) + ", expected " +
                       std::to_string(input_width()) + " (2 x " + std::to_string(options_.n_groups) + " groups)");
  }
}

std::vector<double> Policy::forward(std::span<const double> state) const {
  check_state(state);
  const Matrix h = hidden_.forward(store_, as_row(state));
  const Matrix z = output_.forward(store_, h);
  return nn::softmax(std::span<const double>(z.data(), static_cast<std::size_t>(z.cols())));
}

std::vector<double> Policy::distribution(std::span<const double> state, Mode mode) const {
  switch (mode) {
    case Mode::kLearned:
      return forward(state);
    case Mode::kUniform:
      check_state(state);
      return std::vector<double>(options_.n_groups, 1.0 / static_cast<double>(options_.n_groups));
    case Mode::kInverse:
      return inverse_distribution(forward(state));
  }
  throw InvalidInput("policy: bad mode");
}

std::vector<ActionSample> Policy::sample_actions(std::span<const double> state, std::size_t k, Mode mode,
                                                 nn::Rng& rng) const {
  const std::vector<double> p = distribution(state, mode);
  std::vector<ActionSample> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t g = rng.categorical(p);
    out.push_back({g, std::log(std::max(p[g], nn::kProbabilityFloor)), mode});
  }
  return out;
}

double Policy::objective(std::span<const ActionSample> actions, double advantage, std::span<const double> state,
                         bool with_grad) {
  check_state(state);
  const Matrix x = as_row(state);
  const Matrix h = hidden_.forward(store_, x);
  const Matrix z = output_.forward(store_, h);
  const std::vector<double> logp = log_softmax(z);
  const std::size_t n = logp.size();

  std::vector<double> counts(n, 0.0);
  double sum_logp = 0.0;
  for (const auto& a : actions) {
    if (a.group >= n) {
      throw InvalidInput("policy: action group " + std::to_string(a.group) + " out of range for " +
                         std::to_string(n) + " groups");
    }
    counts[a.group] += 1.0;
    sum_logp += logp[a.group];
  }
  double entropy = 0.0;
  for (double lp : logp) entropy -= std::exp(lp) * lp;
  const double j_value = advantage * sum_logp + options_.beta * entropy;
  if (!with_grad) return j_value;

  const double k = static_cast<double>(actions.size());
  Matrix dz(1, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const double pj = std::exp(logp[j]);
    const double dj = advantage * (counts[j] - k * pj) - options_.beta * pj * (logp[j] + entropy);
    dz(0, static_cast<Eigen::Index>(j)) = -dj;
  }
  const Matrix dh = output_.backward(store_, h, z, dz);
  hidden_.backward(store_, x, h, dh);
  return j_value;
}

UpdateDiagnostics Policy::reinforce_update(std::span<const ActionSample> actions, double reward,
                                           std::span<const double> state) {
  for (const auto& a : actions) {
    if (a.mode != Mode::kLearned) {
      throw InvalidInput("reinforce_update: actions were sampled in " + to_string(a.mode) +
                         " mode; only learned-mode actions can be credited");
    }
  }
  if (!std::isfinite(reward)) throw NumericError("reinforce_update: non-finite reward");
  UpdateDiagnostics d;
  d.reward = reward;
  d.baseline_before = baseline_;
  d.advantage = reward - baseline_;
  store_.zero_grad();
  d.objective = objective(actions, d.advantage, state, true);
  d.entropy = nn::entropy(forward(state));
  adam_.step(store_, options_.lr);
  baseline_ = options_.rho * baseline_ + (1.0 - options_.rho) * reward;
  d.baseline_after = baseline_;
  return d;
}

void Policy::save(const std::filesystem::path& path) const {
  nn::ParamStore out = store_;
  out.add(kBaselineTensor, Matrix::Constant(1, 1, baseline_));
  nn::save_checkpoint(out, path);
}

void Policy::load(const std::filesystem::path& path) {
  nn::ParamStore in = store_;
  in.add(kBaselineTensor, Matrix::Zero(1, 1));
  nn::load_checkpoint(in, path);
  for (nn::ParamId id = 0; id < store_.size(); ++id) store_.value(id) = in.value(id);
  baseline_ = in.value(*in.find(kBaselineTensor))(0, 0);
  adam_ = nn::Adam(adam_.options());
}

}  // namespace permrl::policy
