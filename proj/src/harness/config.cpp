#include "permrl/harness/config.hpp"

#include <fstream>
#include <sstream>

#include "permrl/errors.hpp"

namespace permrl::harness {

using curriculum::Task;
using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kPolicy:
      return "policy";
    case Mode::kRandom:
      return "random";
    case Mode::kInverse:
      return "inverse";
    case Mode::kSpatialOnly:
      return "spatial-only";
    case Mode::kTemporalOnly:
      return "temporal-only";
    case Mode::kSerial:
      return "serial";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  for (Mode m : {Mode::kPolicy, Mode::kRandom, Mode::kInverse, Mode::kSpatialOnly, Mode::kTemporalOnly,
                 Mode::kSerial}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + name +
                    "' (expected policy, random, inverse, spatial-only, temporal-only or serial)");
}

RunConfig::RunConfig() {
  spatial_data.spec.kind = toydata::Kind::kSpatial;
  temporal_data.spec.kind = toydata::Kind::kTemporal;
}

std::vector<Task> RunConfig::tasks() const {
  if (learner == "synthetic") return {Task::kSpatial};
  switch (mode) {
    case Mode::kSpatialOnly:
      return {Task::kSpatial};
    case Mode::kTemporalOnly:
      return {Task::kTemporal};
    default:
      return {Task::kSpatial, Task::kTemporal};
  }
}

curriculum::Selection RunConfig::effective_selection() const {
  switch (mode) {
    case Mode::kPolicy:
      return curriculum::Selection::kPolicy;
    case Mode::kRandom:
      return curriculum::Selection::kRandom;
    case Mode::kInverse:
      return curriculum::Selection::kInverse;
    default:
      return selection;
  }
}

ordering::ModelConfig RunConfig::model_config() const {
  ordering::ModelConfig m;
  m.tile_input_dim = spatial_data.spec.part_dim();
  m.frame_input_dim = temporal_data.spec.part_dim();
  m.encoder_dim = encoder_dim;
  m.fc6_dim = fc6_dim;
  m.fc7_dim = fc7_dim;
  m.lstm_hidden_dim = lstm_hidden_dim;
  m.n_tiles = spatial_data.spec.parts();
  m.n_frames = temporal_data.spec.parts();
  m.n_perm_spatial = spatial_perms;
  m.n_perm_temporal = temporal_perms;
  return m;
}

const DataConfig& RunConfig::data(Task task) const { return task == Task::kSpatial ? spatial_data : temporal_data; }

std::size_t RunConfig::perm_count(Task task) const { return task == Task::kSpatial ? spatial_perms : temporal_perms; }

std::size_t RunConfig::perm_length(Task task) const { return data(task).spec.parts(); }

namespace {

double factorial_capped(std::size_t n) {
  double f = 1.0;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

void add_all(std::vector<std::string>& out, const std::vector<std::string>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

std::vector<std::string> RunConfig::violations() const {
  std::vector<std::string> out;
  if (out_dir.empty()) out.push_back("out_dir must not be empty");
  if (learner != "network" && learner != "synthetic") {
    out.push_back("learner must be 'network' or 'synthetic', got '" + learner + "'");
  }
  if (learner == "synthetic" && mode != Mode::kPolicy && mode != Mode::kRandom && mode != Mode::kInverse &&
      mode != Mode::kSpatialOnly) {
    out.push_back("the synthetic learner supports modes policy, random, inverse and spatial-only");
  }
  for (const Task t : {Task::kSpatial, Task::kTemporal}) {
    const auto& d = data(t);
    const std::string name = "data." + curriculum::to_string(t);
    try {
      d.spec.validate();
    } catch (const InvalidInput& e) {
      out.push_back(name + ": " + e.what());
    }
    const std::size_t n = perm_length(t);
    const std::size_t size = perm_count(t);
    if (size < 1) out.push_back("perms." + curriculum::to_string(t) + "_size must be >= 1");
    if (n <= 20 && static_cast<double>(size) > factorial_capped(n)) {
      out.push_back("perms." + curriculum::to_string(t) + "_size (" + std::to_string(size) + ") exceeds " +
                    std::to_string(n) + "! distinct permutations");
    }
  }
  add_all(out, model_config().violations());
  add_all(out, curriculum.violations());
  add_all(out, policy.violations());
  if (policy.n_groups != curriculum.n_groups) out.push_back("policy.n_groups must equal curriculum.n_groups");
  if (!(lr > 0.0)) out.push_back("curriculum.lr must be positive");
  if (!(jitter >= 0.0)) out.push_back("curriculum.jitter must be non-negative");
  for (const Task t : tasks()) {
    if (curriculum.n_groups > perm_count(t)) {
      out.push_back("curriculum.n_groups (" + std::to_string(curriculum.n_groups) + ") exceeds the " +
                    std::to_string(perm_count(t)) + " " + curriculum::to_string(t) + " permutations");
    }
  }
  if (learner == "synthetic") {
    add_all(out, synthetic.violations());
    if (spatial_perms < 3) out.push_back("the synthetic learner needs perms.spatial_size >= 3");
  }
  return out;
}

ordered_json RunConfig::to_json() const {
  auto data_json = [](const DataConfig& d) {
    ordered_json j;
    if (d.spec.kind == toydata::Kind::kSpatial) {
      j["grid"] = d.spec.grid;
    } else {
      j["frames"] = d.spec.frames;
    }
    j["extent"] = d.spec.extent;
    j["n_classes"] = d.spec.n_classes;
    j["train"] = d.spec.train;
    j["val"] = d.spec.val;
    j["test"] = d.spec.test;
    j["path"] = d.path;
    return j;
  };
  ordered_json j;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["mode"] = to_string(mode);
  j["selection"] = curriculum::to_string(selection);
  j["learner"] = learner;
  j["data"]["spatial"] = data_json(spatial_data);
  j["data"]["temporal"] = data_json(temporal_data);
  j["perms"]["spatial_size"] = spatial_perms;
  j["perms"]["temporal_size"] = temporal_perms;
  j["model"]["encoder_dim"] = encoder_dim;
  j["model"]["fc6_dim"] = fc6_dim;
  j["model"]["fc7_dim"] = fc7_dim;
  j["model"]["lstm_hidden_dim"] = lstm_hidden_dim;
  auto& c = j["curriculum"];
  c["n_groups"] = curriculum.n_groups;
  c["n_free"] = curriculum.n_free;
  c["k"] = curriculum.k;
  c["batch"] = curriculum.batch;
  c["episodes"] = curriculum.episodes;
  c["lr"] = lr;
  c["jitter"] = jitter;
  c["free_phase_follows_policy"] = curriculum.free_phase_follows_policy;
  c["checkpoint_every"] = curriculum.checkpoint_every;
  c["kmeans_restarts"] = curriculum.kmeans.restarts;
  c["kmeans_max_iterations"] = curriculum.kmeans.max_iterations;
  c["kmeans_tolerance"] = curriculum.kmeans.tolerance;
  auto& p = j["policy"];
  p["lr"] = policy.lr;
  p["gamma"] = policy.gamma;
  p["rho"] = policy.rho;
  p["beta"] = policy.beta;
  p["hidden"] = policy.hidden;
  auto& s = j["synthetic"];
  s["val_size"] = synthetic.val_size;
  s["train_size"] = synthetic.train_size;
  s["learning_rate"] = synthetic.learning_rate;
  s["transfer"] = synthetic.transfer;
  s["floor"] = synthetic.floor;
  s["forgetting"] = synthetic.forgetting;
  s["noise"] = synthetic.noise;
  return j;
}

namespace {

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

// Merges `src` into `dst` (the defaults tree), recording unknown keys and
// type mismatches.
void merge(json& dst, const json& src, const std::string& where, std::vector<std::string>& errors) {
  if (!src.is_object()) {
    errors.push_back((where.empty() ? std::string("config") : where) + " must be an object");
    return;
  }
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!dst.contains(it.key())) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), key, errors);
    } else if (!same_kind(slot, it.value())) {
      errors.push_back(key + " must be a " + std::string(slot.type_name()) + ", got " + it.value().type_name());
    } else {
      slot = it.value();
    }
  }
}

void apply_override(json& tree, const std::string& assignment, std::vector<std::string>& errors) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    errors.push_back("override '" + assignment + "' is not of the form key=value");
    return;
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* slot = &tree;
  std::stringstream parts(key);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (!slot->is_object() || !slot->contains(part)) {
      errors.push_back("override: unknown key '" + key + "'");
      return;
    }
    slot = &(*slot)[part];
  }
  if (slot->is_object()) {
    errors.push_back("override: '" + key + "' names a section, not a field");
  } else if (slot->is_string() && !value.is_string()) {
    *slot = text;
  } else if (!same_kind(*slot, value)) {
    errors.push_back("override " + key + " must be a " + std::string(slot->type_name()) + ", got '" + text + "'");
  } else {
    *slot = value;
  }
}

class Reader {
 public:
  Reader(const json& root, std::vector<std::string>& errors) : root_(root), errors_(errors) {}

  template <class T>
  void count(const char* path, T& out) {
    const json& v = at(path);
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      out = static_cast<T>(v.get<std::uint64_t>());
    } else {
      errors_.push_back(std::string(path) + " must be a non-negative integer");
    }
  }
  void real(const char* path, double& out) { out = at(path).get<double>(); }
  void flag(const char* path, bool& out) { out = at(path).get<bool>(); }
  void text(const char* path, std::string& out) { out = at(path).get<std::string>(); }

 private:
  const json& at(const char* path) const { return root_.at(json::json_pointer(path)); }

  const json& root_;
  std::vector<std::string>& errors_;
};

}  // namespace

RunConfig make_config(const json& doc, const std::vector<std::string>& overrides) {
  std::vector<std::string> errors;
  json tree = json(RunConfig{}.to_json());
  merge(tree, doc, "", errors);
  for (const auto& o : overrides) apply_override(tree, o, errors);

  // The tree only ever holds well-typed values, so reading it is safe even
  // after merge errors; every problem gets reported at once.
  RunConfig c;
  {
    Reader r(tree, errors);
    r.count("/seed", c.seed);
    r.text("/out_dir", c.out_dir);
    std::string name;
    r.text("/mode", name);
    try {
      c.mode = mode_from_string(name);
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
    r.text("/selection", name);
    try {
      c.selection = curriculum::selection_from_string(name);
    } catch (const InvalidInput& e) {
      errors.push_back(std::string("selection: ") + e.what());
    }
    r.text("/learner", c.learner);
    for (const Task t : {Task::kSpatial, Task::kTemporal}) {
      DataConfig& d = t == Task::kSpatial ? c.spatial_data : c.temporal_data;
      const std::string base = "/data/" + curriculum::to_string(t) + "/";
      if (t == Task::kSpatial) {
        r.count((base + "grid").c_str(), d.spec.grid);
      } else {
        r.count((base + "frames").c_str(), d.spec.frames);
      }
      r.count((base + "extent").c_str(), d.spec.extent);
      r.count((base + "n_classes").c_str(), d.spec.n_classes);
      r.count((base + "train").c_str(), d.spec.train);
      r.count((base + "val").c_str(), d.spec.val);
      r.count((base + "test").c_str(), d.spec.test);
      r.text((base + "path").c_str(), d.path);
    }
    r.count("/perms/spatial_size", c.spatial_perms);
    r.count("/perms/temporal_size", c.temporal_perms);
    r.count("/model/encoder_dim", c.encoder_dim);
    r.count("/model/fc6_dim", c.fc6_dim);
    r.count("/model/fc7_dim", c.fc7_dim);
    r.count("/model/lstm_hidden_dim", c.lstm_hidden_dim);
    r.count("/curriculum/n_groups", c.curriculum.n_groups);
    r.count("/curriculum/n_free", c.curriculum.n_free);
    r.count("/curriculum/k", c.curriculum.k);
    r.count("/curriculum/batch", c.curriculum.batch);
    r.count("/curriculum/episodes", c.curriculum.episodes);
    r.real("/curriculum/lr", c.lr);
    r.real("/curriculum/jitter", c.jitter);
    r.flag("/curriculum/free_phase_follows_policy", c.curriculum.free_phase_follows_policy);
    r.count("/curriculum/checkpoint_every", c.curriculum.checkpoint_every);
    r.count("/curriculum/kmeans_restarts", c.curriculum.kmeans.restarts);
    r.count("/curriculum/kmeans_max_iterations", c.curriculum.kmeans.max_iterations);
    r.real("/curriculum/kmeans_tolerance", c.curriculum.kmeans.tolerance);
    r.real("/policy/lr", c.policy.lr);
    r.real("/policy/gamma", c.policy.gamma);
    r.real("/policy/rho", c.policy.rho);
    r.real("/policy/beta", c.policy.beta);
    r.count("/policy/hidden", c.policy.hidden);
    c.policy.n_groups = c.curriculum.n_groups;
    r.count("/synthetic/val_size", c.synthetic.val_size);
    r.count("/synthetic/train_size", c.synthetic.train_size);
    r.real("/synthetic/learning_rate", c.synthetic.learning_rate);
    r.real("/synthetic/transfer", c.synthetic.transfer);
    r.real("/synthetic/floor", c.synthetic.floor);
    r.real("/synthetic/forgetting", c.synthetic.forgetting);
    r.real("/synthetic/noise", c.synthetic.noise);
  }
  add_all(errors, c.violations());
  if (!errors.empty()) {
    std::string msg = "config rejected (" + std::to_string(errors.size()) + " problem" +
                      (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const json doc = json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return make_config(doc, overrides);
}

}  // namespace permrl::harness
