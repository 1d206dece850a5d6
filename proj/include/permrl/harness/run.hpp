#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "permrl/curriculum/learners.hpp"
#include "permrl/curriculum/training.hpp"
#include "permrl/harness/config.hpp"
#include "permrl/ordering_net.hpp"
#include "permrl/permset.hpp"
#include "permrl/toydata.hpp"

namespace permrl::harness {

/// Datasets, permutation sets and model of one seeded run. Every piece comes
/// from its own sub-seed of the master seed, so modes that share a seed share
/// data, permutations and initial weights.
struct Environment {
  std::map<curriculum::Task, toydata::Dataset> data;
  std::map<curriculum::Task, permset::PermutationSet> perms;
  std::unique_ptr<ordering::OrderingModel> model;  // null for the synthetic learner

  std::map<curriculum::Task, curriculum::TaskData> task_data() const;
};

/// Dataset of one task: loaded from data.<task>.path when set, else generated
/// from the config with the task's data sub-seed. ConfigError on a mismatch.
toydata::Dataset task_dataset(const RunConfig& config, curriculum::Task task);
/// Permutation set of one task from the task's permutation sub-seed.
permset::PermutationSet task_permutations(const RunConfig& config, curriculum::Task task);

/// Loads or generates everything the config asks for. Throws ConfigError
/// when a dataset file does not fit the config.
Environment build_environment(const RunConfig& config);

/// Network learner over the environment, or a synthetic learner (which then
/// owns its own copy of the spatial permutations).
std::unique_ptr<curriculum::Learner> make_learner(const RunConfig& config, Environment& env);

nlohmann::ordered_json to_json(const curriculum::ValidationEvent& e, const std::string& stage);
nlohmann::ordered_json to_json(const curriculum::EpisodeRecord& r, const std::string& stage);
nlohmann::ordered_json to_json(const curriculum::Counters& c);

struct StageSummary {
  std::string stage;  // "main", or "spatial" / "temporal" in serial mode
  std::vector<curriculum::Task> tasks;
  curriculum::Counters counters;
  std::size_t episodes = 0;
  std::map<curriculum::Task, double> final_error;
};

struct TrainSummary {
  std::filesystem::path run_dir;
  std::vector<StageSummary> stages;
};

/**
 * Runs training as configured and writes into config.out_dir:
 *   config.json, perms.<task>.json, metrics.jsonl (one line per validation),
 *   episodes.jsonl (one line per task per episode), counters.json and
 *   checkpoints/<name>/{model.ckpt, policy.<task>.ckpt}.
 * Nothing is written when the config is rejected.
 */
TrainSummary cmd_train(const RunConfig& config);

/// Loads model weights into a model built from the config. Throws
/// InvalidInput when the checkpoint does not match the model.
std::unique_ptr<ordering::OrderingModel> load_model(const RunConfig& config, const std::filesystem::path& checkpoint);

/// Checkpoint directories of a run, in training order.
std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& run_dir);

/// Lines of a JSONL file. Throws InvalidInput when missing or empty and
/// ParseError on a malformed line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace permrl::harness
