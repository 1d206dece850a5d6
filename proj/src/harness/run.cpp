#include "permrl/harness/run.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "permrl/errors.hpp"
#include "permrl/nn/param_store.hpp"

namespace permrl::harness {

using curriculum::Task;
using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::map<Task, curriculum::TaskData> Environment::task_data() const {
  std::map<Task, curriculum::TaskData> out;
  for (const auto& [task, d] : data) out[task] = curriculum::TaskData{&d, &perms.at(task)};
  return out;
}

namespace {

std::string seed_key(const char* prefix, Task t) { return std::string(prefix) + "." + curriculum::to_string(t); }

}  // namespace

toydata::Dataset task_dataset(const RunConfig& config, Task task) {
  const DataConfig& d = config.data(task);
  toydata::DatasetSpec spec = d.spec;
  spec.seed = nn::derive_seed(config.seed, seed_key("data", task));
  if (d.path.empty()) return toydata::generate(spec);
  toydata::Dataset loaded;
  try {
    loaded = toydata::load_dataset(d.path);
  } catch (const std::exception& e) {
    throw ConfigError("data." + curriculum::to_string(task) + ".path: " + e.what());
  }
  const auto& s = loaded.spec;
  if (s.kind != spec.kind || s.parts() != spec.parts() || s.extent != spec.extent) {
    throw ConfigError("data." + curriculum::to_string(task) + ".path: dataset " + d.path +
                      " has a different kind, part count or extent than the config");
  }
  return loaded;
}

permset::PermutationSet task_permutations(const RunConfig& config, Task task) {
  return permset::generate_set(config.perm_length(task), config.perm_count(task),
                               nn::derive_seed(config.seed, seed_key("perms", task)));
}

Environment build_environment(const RunConfig& config) {
  if (const auto v = config.violations(); !v.empty()) {
    std::string msg = "config rejected:";
    for (const auto& s : v) msg += "\n  " + s;
    throw ConfigError(msg);
  }
  Environment env;
  for (const Task t : config.tasks()) {
    env.perms.emplace(t, task_permutations(config, t));
    if (config.learner == "network") env.data.emplace(t, task_dataset(config, t));
  }
  if (config.learner == "network") {
    env.model = std::make_unique<ordering::OrderingModel>(config.model_config(),
                                                          nn::derive_seed(config.seed, "init"));
  }
  return env;
}

std::unique_ptr<curriculum::Learner> make_learner(const RunConfig& config, Environment& env) {
  if (config.learner == "synthetic") {
    return std::make_unique<curriculum::SyntheticLearner>(Task::kSpatial, env.perms.at(Task::kSpatial),
                                                          config.synthetic,
                                                          nn::derive_seed(config.seed, "synthetic"));
  }
  return std::make_unique<curriculum::OrderingLearner>(*env.model, env.task_data(), config.lr, config.jitter,
                                                       nn::derive_seed(config.seed, "augment"));
}

namespace {

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

ordered_json to_json(const curriculum::ValidationEvent& e, const std::string& stage) {
  ordered_json j;
  j["stage"] = stage;
  j["episode"] = e.episode;
  j["phase"] = e.phase;
  j["task"] = curriculum::to_string(e.task);
  j["step"] = e.step;
  j["error"] = e.error;
  j["reward"] = optional_json(e.reward);
  j["baseline"] = optional_json(e.baseline);
  j["group_medians"] = e.group_medians;
  j["group_sizes"] = e.group_sizes;
  j["selection_counts"] = e.selection_counts;
  j["perm_errors"] = e.perm_errors;
  j["ratio_min"] = e.ratio_min;
  j["ratio_max"] = e.ratio_max;
  j["train_steps"] = e.train_steps;
  j["train_forward"] = e.train_forward;
  j["forward_pass_total"] = e.forward_pass_total;
  return j;
}

ordered_json to_json(const curriculum::EpisodeRecord& r, const std::string& stage) {
  ordered_json j;
  j["stage"] = stage;
  j["episode"] = r.episode;
  j["task"] = curriculum::to_string(r.task);
  j["selection"] = curriculum::to_string(r.selection);
  j["state"] = r.state;
  j["action_of_perm"] = r.action_of_perm;
  j["distribution"] = r.distribution;
  ordered_json actions = ordered_json::array();
  for (const auto& a : r.actions) actions.push_back({{"group", a.group}, {"log_prob", a.log_prob}});
  j["actions"] = actions;
  j["selection_counts"] = r.selection_counts;
  j["perm_counts"] = r.perm_counts;
  j["free_perm_counts"] = r.free_perm_counts;
  j["perm_errors"] = r.perm_errors;
  j["previous_error"] = optional_json(r.previous_error);
  j["error"] = r.error;
  j["baseline"] = r.baseline;
  j["next_error"] = r.next_error;
  j["reward"] = r.reward;
  if (r.update) {
    const auto& u = *r.update;
    j["update"] = {{"reward", u.reward},
                   {"advantage", u.advantage},
                   {"baseline_before", u.baseline_before},
                   {"baseline_after", u.baseline_after},
                   {"entropy", u.entropy},
                   {"objective", u.objective}};
  } else {
    j["update"] = nullptr;
  }
  return j;
}

ordered_json to_json(const curriculum::Counters& c) {
  ordered_json j;
  j["train_steps"] = c.train_steps;
  j["train_forward"] = c.train_forward;
  j["validation_forward"] = c.validation_forward;
  j["monitor_forward"] = c.monitor_forward;
  j["validations"] = c.validations;
  j["episodes"] = c.episodes;
  j["forward_pass_total"] = c.forward_pass_total();
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

class RunWriter : public curriculum::TrainingObserver {
 public:
  RunWriter(const fs::path& dir, std::string stage, bool prefix_checkpoints, const ordering::OrderingModel* model)
      : dir_(dir),
        stage_(std::move(stage)),
        prefix_(prefix_checkpoints),
        model_(model),
        metrics_(dir / "metrics.jsonl", std::ios::binary | std::ios::app),
        episodes_(dir / "episodes.jsonl", std::ios::binary | std::ios::app) {
    if (!metrics_ || !episodes_) throw std::runtime_error("cannot open JSONL files in " + dir.string());
  }

  void on_validation(const curriculum::ValidationEvent& e) override {
    metrics_ << to_json(e, stage_).dump() << '\n';
  }
  void on_episode(const curriculum::EpisodeRecord& r) override { episodes_ << to_json(r, stage_).dump() << '\n'; }
  void on_checkpoint(std::size_t done, const curriculum::TrainingRun& run) override {
    char name[32];
    std::snprintf(name, sizeof name, "ep%04zu", done);
    const fs::path dir = dir_ / "checkpoints" / (prefix_ ? stage_ + "-" + name : std::string(name));
    fs::create_directories(dir);
    if (model_) nn::save_checkpoint(model_->params(), dir / "model.ckpt");
    for (const Task t : run.tasks()) run.policy(t).save(dir / ("policy." + curriculum::to_string(t) + ".ckpt"));
    metrics_.flush();
    episodes_.flush();
  }

 private:
  fs::path dir_;
  std::string stage_;
  bool prefix_;
  const ordering::OrderingModel* model_;
  std::ofstream metrics_;
  std::ofstream episodes_;
};

}  // namespace

TrainSummary cmd_train(const RunConfig& config) {
  Environment env = build_environment(config);
  auto learner = make_learner(config, env);

  const fs::path dir = config.out_dir;
  fs::create_directories(dir);
  for (const char* f : {"metrics.jsonl", "episodes.jsonl"}) fs::remove(dir / f);
  fs::remove_all(dir / "checkpoints");
  write_text(dir / "config.json", config.to_json().dump(2) + "\n");
  for (const auto& [task, perms] : env.perms) {
    permset::save_set(perms, dir / ("perms." + curriculum::to_string(task) + ".json"));
  }

  std::vector<std::pair<std::string, std::vector<Task>>> stages;
  if (config.mode == Mode::kSerial) {
    stages = {{"spatial", {Task::kSpatial}}, {"temporal", {Task::kTemporal}}};
  } else {
    stages = {{"main", config.tasks()}};
  }

  TrainSummary summary;
  summary.run_dir = dir;
  ordered_json counters;
  curriculum::Counters total;
  for (const auto& [stage, tasks] : stages) {
    const std::uint64_t seed =
        nn::derive_seed(config.seed, stage == "main" ? std::string("curriculum") : "curriculum." + stage);
    curriculum::TrainingRun run(*learner, tasks, config.effective_selection(), config.curriculum, config.policy, seed);
    RunWriter writer(dir, stage, stages.size() > 1, env.model.get());
    run.run(&writer);

    StageSummary s;
    s.stage = stage;
    s.tasks = tasks;
    s.counters = run.counters();
    s.episodes = run.episodes_done();
    for (const Task t : tasks) {
      if (!run.history(t).empty()) s.final_error[t] = run.history(t).back().error;
    }
    ordered_json entry = to_json(s.counters);
    entry["stage"] = stage;
    ordered_json task_list = ordered_json::array();
    for (const Task t : tasks) {
      task_list.push_back({{"task", curriculum::to_string(t)},
                           {"perms", learner->permutations(t).size()},
                           {"val_size", learner->validation_size(t)}});
    }
    entry["tasks"] = task_list;
    counters["stages"].push_back(entry);
    total.train_steps += s.counters.train_steps;
    total.train_forward += s.counters.train_forward;
    total.validation_forward += s.counters.validation_forward;
    total.monitor_forward += s.counters.monitor_forward;
    total.validations += s.counters.validations;
    total.episodes += s.counters.episodes;
    summary.stages.push_back(std::move(s));
  }
  counters["batch"] = config.curriculum.batch;
  counters["selection"] = curriculum::to_string(config.effective_selection());
  counters["total"] = to_json(total);
  write_text(dir / "counters.json", counters.dump(2) + "\n");
  return summary;
}

std::unique_ptr<ordering::OrderingModel> load_model(const RunConfig& config, const fs::path& checkpoint) {
  auto model = std::make_unique<ordering::OrderingModel>(config.model_config(), 0);
  nn::load_checkpoint(model->params(), checkpoint);
  return model;
}

std::vector<fs::path> list_checkpoints(const fs::path& run_dir) {
  std::vector<fs::path> out;
  const fs::path root = run_dir / "checkpoints";
  if (!fs::is_directory(root)) return out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) out.push_back(entry.path());
  }
  // Serial runs prefix the stage; the spatial stage trains first.
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
    auto rank = [](const std::string& n) { return n.rfind("temporal-", 0) == 0 ? 1 : 0; };
    const std::string na = a.filename().string();
    const std::string nb = b.filename().string();
    return std::make_pair(rank(na), na) < std::make_pair(rank(nb), nb);
  });
  return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": not a JSON object");
    }
    out.push_back(std::move(j));
  }
  if (out.empty()) throw InvalidInput(path.string() + " has no records");
  return out;
}

}  // namespace permrl::harness
