#pragma once

/**
 * @file policy.hpp
 * @brief Group-proposing policy trained with REINFORCE.
 *
 * Input is the grouped state (2 * n_groups numbers), a tanh hidden layer
 * feeds a softmax over groups. The update ascends
 *   J = A * sum_k log pi(a_k | s) + beta * H(pi(. | s)),  A = r - b,
 * with one Adam step, after which the moving-average baseline
 * b <- rho * b + (1 - rho) * r.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "permrl/nn/layers.hpp"
#include "permrl/nn/optim.hpp"
#include "permrl/nn/param_store.hpp"
#include "permrl/nn/rng.hpp"

namespace permrl::policy {

enum class Mode { kLearned, kUniform, kInverse };

std::string to_string(Mode mode);
/// "learned", "uniform" or "inverse"; InvalidInput otherwise.
Mode mode_from_string(const std::string& name);

struct PolicyOptions {
  std::size_t n_groups = 6;
  std::size_t hidden = 16;
  double lr = 0.01;
  double gamma = 1.0;  // single-step episodes, so it never scales anything
  double rho = 0.9;
  double beta = 0.01;

  std::vector<std::string> violations() const;
  bool operator==(const PolicyOptions&) const = default;
};

struct ActionSample {
  std::size_t group = 0;
  double log_prob = 0.0;
  Mode mode = Mode::kLearned;
};

struct UpdateDiagnostics {
  double reward = 0.0;
  double advantage = 0.0;
  double baseline_before = 0.0;
  double baseline_after = 0.0;
  double entropy = 0.0;
  double objective = 0.0;
};

/// q_j = (1 - p_j) / (n - 1); a single group keeps probability 1.
std::vector<double> inverse_distribution(std::span<const double> p);

class Policy {
 public:
  Policy(const PolicyOptions& options, std::uint64_t seed);

  const PolicyOptions& options() const noexcept { return options_; }
  std::size_t n_groups() const noexcept { return options_.n_groups; }
  std::size_t input_width() const noexcept { return 2 * options_.n_groups; }

  /// pi(. | state). Throws InvalidInput when state.size() != input_width().
  std::vector<double> forward(std::span<const double> state) const;
  /// The distribution a mode samples from.
  std::vector<double> distribution(std::span<const double> state, Mode mode) const;

  std::vector<ActionSample> sample_actions(std::span<const double> state, std::size_t k, Mode mode,
                                           nn::Rng& rng) const;

  /// One REINFORCE step. Every action must be learned-mode (InvalidInput
  /// otherwise). All actions share the episode reward.
  UpdateDiagnostics reinforce_update(std::span<const ActionSample> actions, double reward,
                                     std::span<const double> state);

  /// J for a fixed advantage. With `with_grad`, accumulates -dJ/dtheta into
  /// the store (the quantity Adam descends).
  double objective(std::span<const ActionSample> actions, double advantage, std::span<const double> state,
                   bool with_grad);

  double baseline() const noexcept { return baseline_; }
  std::uint64_t updates() const noexcept { return adam_.steps(); }
  nn::ParamStore& params() noexcept { return store_; }
  const nn::ParamStore& params() const noexcept { return store_; }

  /// Parameters plus the reward baseline, in the nn checkpoint format.
  void save(const std::filesystem::path& path) const;
  /// Restores parameters and baseline; optimizer moments start fresh.
  void load(const std::filesystem::path& path);

 private:
  void check_state(std::span<const double> state) const;

  PolicyOptions options_;
  nn::ParamStore store_;
  nn::Dense hidden_;
  nn::Dense output_;
  nn::Adam adam_;
  double baseline_ = 0.0;
};

}  // namespace permrl::policy
