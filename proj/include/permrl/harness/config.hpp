#pragma once

/**
 * @file config.hpp
 * @brief Run configuration: JSON file, dotted overrides, pre-flight checks.
 *
 * Layout (every field optional, defaults shown by `RunConfig{}`):
 *
 *   { "seed": 1, "out_dir": "runs/default", "mode": "policy",
 *     "selection": "policy", "learner": "network",
 *     "data":  { "spatial":  { "grid", "extent", "n_classes", "train", "val", "test", "path" },
 *                "temporal": { "frames", "extent", "n_classes", "train", "val", "test", "path" } },
 *     "perms": { "spatial_size", "temporal_size" },
 *     "model": { "encoder_dim", "fc6_dim", "fc7_dim", "lstm_hidden_dim" },
 *     "curriculum": { "n_groups", "n_free", "k", "batch", "episodes", "lr", "jitter",
 *                     "free_phase_follows_policy", "checkpoint_every",
 *                     "kmeans_restarts", "kmeans_max_iterations", "kmeans_tolerance" },
 *     "policy": { "lr", "gamma", "rho", "beta", "hidden" },
 *     "synthetic": { "val_size", "train_size", "learning_rate", "transfer", "floor",
 *                    "forgetting", "noise" } }
 *
 * `mode` is one of policy, random, inverse (both tasks, that selection),
 * spatial-only, temporal-only or serial (spatial then temporal); the last
 * three use `selection`. The synthetic learner runs the spatial task only.
 */

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "permrl/curriculum/learners.hpp"
#include "permrl/curriculum/training.hpp"
#include "permrl/ordering_net.hpp"
#include "permrl/policy.hpp"
#include "permrl/toydata.hpp"

namespace permrl::harness {

enum class Mode { kPolicy, kRandom, kInverse, kSpatialOnly, kTemporalOnly, kSerial };

std::string to_string(Mode m);
/// Throws ConfigError on an unknown name.
Mode mode_from_string(const std::string& name);

struct DataConfig {
  toydata::DatasetSpec spec;
  std::string path;  // load instead of generating when set
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";
  Mode mode = Mode::kPolicy;
  curriculum::Selection selection = curriculum::Selection::kPolicy;
  std::string learner = "network";  // or "synthetic"

  DataConfig spatial_data;
  DataConfig temporal_data;
  std::size_t spatial_perms = 24;
  std::size_t temporal_perms = 24;

  std::size_t encoder_dim = 64;
  std::size_t fc6_dim = 64;
  std::size_t fc7_dim = 128;
  std::size_t lstm_hidden_dim = 32;

  curriculum::CurriculumOptions curriculum;
  double lr = 0.05;
  double jitter = toydata::kDefaultJitter;
  policy::PolicyOptions policy;
  curriculum::SyntheticOptions synthetic;

  RunConfig();

  /// Tasks trained by the mode, in training order.
  std::vector<curriculum::Task> tasks() const;
  /// Selection used by the training run(s).
  curriculum::Selection effective_selection() const;
  /// Model dimensions implied by data and permutation settings.
  ordering::ModelConfig model_config() const;
  const DataConfig& data(curriculum::Task task) const;
  std::size_t perm_count(curriculum::Task task) const;
  /// Length of the permutations of a task (tiles or frames).
  std::size_t perm_length(curriculum::Task task) const;

  /// Every cross-field problem; empty when the config is usable.
  std::vector<std::string> violations() const;

  nlohmann::ordered_json to_json() const;
};

/**
 * Builds a config from defaults, then `doc`, then `overrides` ("a.b=value",
 * value parsed as JSON when possible, else taken as a string). Unknown keys,
 * wrong types and all cross-field violations are collected into one
 * ConfigError.
 */
RunConfig make_config(const nlohmann::json& doc, const std::vector<std::string>& overrides = {});

/// Reads a JSON file (ConfigError when unreadable or malformed) and calls make_config.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace permrl::harness
