#include "permrl/harness/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "permrl/curriculum/learners.hpp"
#include "permrl/curriculum/training.hpp"
#include "permrl/errors.hpp"
#include "permrl/harness/run.hpp"

namespace permrl::harness {

using curriculum::Task;
using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

template <class T>
std::vector<T> array_of(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw InvalidInput(std::string("record lacks array '") + key + "'");
  return j.at(key).get<std::vector<T>>();
}

}  // namespace

// ---- retrieval ----

ordered_json RetrievalReport::to_json() const {
  ordered_json j;
  j["distance"] = distance;
  j["query_split"] = query_split;
  j["gallery_split"] = gallery_split;
  j["n_query"] = n_query;
  j["n_gallery"] = n_gallery;
  ordered_json acc;
  for (std::size_t i = 0; i < ks.size(); ++i) acc["top" + std::to_string(ks[i])] = accuracy[i];
  j["accuracy"] = acc;
  return j;
}

RetrievalReport retrieval_topk(const nn::Matrix& query, std::span<const std::uint32_t> query_labels,
                               const nn::Matrix& gallery, std::span<const std::uint32_t> gallery_labels,
                               std::span<const std::size_t> ks) {
  if (query.rows() == 0 || gallery.rows() == 0) throw InvalidInput("retrieval: empty query or gallery");
  if (query.cols() != gallery.cols()) throw InvalidInput("retrieval: feature widths differ");
  if (static_cast<std::size_t>(query.rows()) != query_labels.size() ||
      static_cast<std::size_t>(gallery.rows()) != gallery_labels.size()) {
    throw InvalidInput("retrieval: label count does not match feature rows");
  }
  auto unit_rows = [](const nn::Matrix& m) {
    nn::Matrix u = m;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const double norm = u.row(i).norm();
      if (norm > 0.0) u.row(i) /= norm;
    }
    return u;
  };
  const nn::Matrix q = unit_rows(query);
  const nn::Matrix g = unit_rows(gallery);
  const nn::Matrix cos = q * g.transpose();

  RetrievalReport rep;
  rep.ks.assign(ks.begin(), ks.end());
  rep.n_query = static_cast<std::size_t>(query.rows());
  rep.n_gallery = static_cast<std::size_t>(gallery.rows());
  std::vector<std::size_t> hits(ks.size(), 0);
  std::vector<std::size_t> order(rep.n_gallery);
  for (std::size_t i = 0; i < rep.n_query; ++i) {
    std::iota(order.begin(), order.end(), 0);
    const auto row = cos.row(static_cast<Eigen::Index>(i));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return 1.0 - row(static_cast<Eigen::Index>(a)) < 1.0 - row(static_cast<Eigen::Index>(b));
    });
    std::size_t first = rep.n_gallery;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (gallery_labels[order[r]] == query_labels[i]) {
        first = r;
        break;
      }
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
      if (first < std::min(ks[k], rep.n_gallery)) ++hits[k];
    }
  }
  for (std::size_t h : hits) rep.accuracy.push_back(static_cast<double>(h) / static_cast<double>(rep.n_query));
  return rep;
}

RetrievalReport cmd_eval_nn(const RunConfig& config, const fs::path& checkpoint, Task task) {
  const toydata::Dataset data = task_dataset(config, task);
  const auto model = load_model(config, checkpoint);
  auto features = [&](const std::vector<toydata::Sample>& split, std::vector<std::uint32_t>& labels) {
    std::vector<std::size_t> ids(split.size());
    std::iota(ids.begin(), ids.end(), 0);
    for (const auto& s : split) labels.push_back(s.label);
    return model->extract_features(toydata::make_plain_batch(split, ids));
  };
  std::vector<std::uint32_t> ql;
  std::vector<std::uint32_t> gl;
  const nn::Matrix q = features(data.test, ql);
  const nn::Matrix g = features(data.train, gl);
  return retrieval_topk(q, ql, g, gl, kRetrievalKs);
}

// ---- selection ----

std::vector<QuartileRow> selection_quartiles(const std::vector<json>& episodes) {
  if (episodes.empty()) throw InvalidInput("selection report: no episode records");
  std::vector<QuartileRow> rows;
  for (const auto& rec : episodes) {
    const auto errors = array_of<double>(rec, "perm_errors");
    const auto counts = array_of<std::size_t>(rec, "perm_counts");
    if (errors.size() != counts.size() || errors.size() < 4) {
      throw InvalidInput("selection report: need matching perm_errors / perm_counts with at least 4 entries");
    }
    const std::size_t n = errors.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
    std::array<std::size_t, 4> draws{};
    std::size_t total = 0;
    for (std::size_t r = 0; r < n; ++r) {
      draws[4 * r / n] += counts[idx[r]];
      total += counts[idx[r]];
    }
    for (std::size_t q = 0; q < 4; ++q) {
      QuartileRow row;
      row.stage = rec.value("stage", "main");
      row.episode = rec.at("episode").get<std::size_t>();
      row.task = rec.at("task").get<std::string>();
      row.quartile = q + 1;
      row.draws = draws[q];
      row.frequency = total ? static_cast<double>(draws[q]) / static_cast<double>(total) : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

std::array<double, 4> quartile_totals(const std::vector<QuartileRow>& rows) {
  std::array<double, 4> d{};
  double total = 0.0;
  for (const auto& r : rows) {
    d[r.quartile - 1] += static_cast<double>(r.draws);
    total += static_cast<double>(r.draws);
  }
  if (total > 0.0) {
    for (double& x : d) x /= total;
  }
  return d;
}

std::vector<HammingRow> selection_by_hamming(const std::vector<json>& episodes,
                                             const std::map<std::string, permset::PermutationSet>& perms) {
  if (episodes.empty()) throw InvalidInput("selection report: no episode records");
  std::vector<HammingRow> rows;
  for (const auto& rec : episodes) {
    const std::string task = rec.at("task").get<std::string>();
    const auto it = perms.find(task);
    if (it == perms.end()) throw InvalidInput("selection report: no permutation set for task " + task);
    const auto& set = it->second;
    const auto counts = array_of<std::size_t>(rec, "perm_counts");
    if (counts.size() != set.size()) throw InvalidInput("selection report: perm_counts do not match the set size");
    const auto id = permset::Permutation::identity(set.n());
    std::vector<std::size_t> draws(set.n() + 1, 0);
    std::size_t total = 0;
    for (std::size_t p = 0; p < set.size(); ++p) {
      draws[permset::hamming(set[p], id)] += counts[p];
      total += counts[p];
    }
    for (std::size_t d = 0; d < draws.size(); ++d) {
      HammingRow row;
      row.stage = rec.value("stage", "main");
      row.episode = rec.at("episode").get<std::size_t>();
      row.task = task;
      row.distance = d;
      row.draws = draws[d];
      row.frequency = total ? static_cast<double>(draws[d]) / static_cast<double>(total) : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string to_csv(const std::vector<QuartileRow>& rows) {
  std::string out = "stage,episode,task,quartile,draws,frequency\n";
  for (const auto& r : rows) {
    out += r.stage + "," + std::to_string(r.episode) + "," + r.task + "," + std::to_string(r.quartile) + "," +
           std::to_string(r.draws) + "," + format_number(r.frequency) + "\n";
  }
  return out;
}

std::string to_csv(const std::vector<HammingRow>& rows) {
  std::string out = "stage,episode,task,distance,draws,frequency\n";
  for (const auto& r : rows) {
    out += r.stage + "," + std::to_string(r.episode) + "," + r.task + "," + std::to_string(r.distance) + "," +
           std::to_string(r.draws) + "," + format_number(r.frequency) + "\n";
  }
  return out;
}

// ---- heatmap ----

Heatmap error_heatmap(const std::vector<json>& metrics, Task task) {
  const std::string name = curriculum::to_string(task);
  std::vector<std::vector<double>> columns;
  Heatmap h;
  for (const auto& e : metrics) {
    if (e.at("task").get<std::string>() != name) continue;
    columns.push_back(array_of<double>(e, "perm_errors"));
    h.columns.push_back(e.value("stage", "main") + "/" + std::to_string(e.at("episode").get<std::size_t>()) + "/" +
                        e.at("phase").get<std::string>());
    if (columns.back().size() != columns.front().size()) throw InvalidInput("heatmap: permutation count changes");
  }
  if (columns.empty()) throw InvalidInput("heatmap: no validation events for the " + name + " task");
  const std::size_t n = columns.front().size();
  std::vector<double> means(n, 0.0);
  for (const auto& c : columns) {
    for (std::size_t p = 0; p < n; ++p) means[p] += c[p];
  }
  h.perm_order.resize(n);
  std::iota(h.perm_order.begin(), h.perm_order.end(), 0);
  std::stable_sort(h.perm_order.begin(), h.perm_order.end(),
                   [&](std::size_t a, std::size_t b) { return means[a] < means[b]; });
  h.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      h.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = columns[c][h.perm_order[r]];
    }
  }
  return h;
}

std::string to_csv(const Heatmap& h) {
  std::string out = "perm";
  for (const auto& c : h.columns) out += "," + c;
  out += "\n";
  for (Eigen::Index r = 0; r < h.values.rows(); ++r) {
    out += std::to_string(h.perm_order[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < h.values.cols(); ++c) out += "," + format_number(h.values(r, c));
    out += "\n";
  }
  return out;
}

// ---- cost ----

CostPrediction closed_form_cost(double val_size, double perms, double batch, double episodes, double iterations) {
  if (!(batch > 0.0)) throw InvalidInput("cost: batch must be positive");
  if (val_size < 0.0 || perms < 0.0 || episodes < 0.0 || iterations < 0.0) {
    throw InvalidInput("cost: counts must be non-negative");
  }
  CostPrediction c{val_size, perms, batch, episodes, iterations, 0.0, 0.0};
  c.v = val_size * perms / batch;
  if (episodes > 0.0) {
    if (!(iterations > 0.0)) throw InvalidInput("cost: episodes without training iterations");
    c.overhead = episodes * 2.0 * c.v / iterations;
  }
  return c;
}

ordered_json CostReport::to_json() const {
  ordered_json j;
  j["episodes"] = episodes;
  j["train_steps"] = train_steps;
  j["train_forward"] = train_forward;
  j["validation_forward"] = validation_forward;
  j["monitor_forward"] = monitor_forward;
  j["predicted_validation_forward"] = predicted_validation_forward;
  j["measured_overhead"] = measured_overhead;
  j["predicted_overhead"] = predicted_overhead;
  ordered_json tasks = ordered_json::array();
  for (const auto& c : per_task) {
    tasks.push_back({{"val_size", c.val_size},
                     {"perms", c.perms},
                     {"batch", c.batch},
                     {"episodes", c.episodes},
                     {"iterations", c.iterations},
                     {"V", c.v},
                     {"overhead", c.overhead}});
  }
  j["closed_form"] = tasks;
  return j;
}

CostReport cmd_cost_report(const fs::path& run_dir) {
  const fs::path path = run_dir / "counters.json";
  std::ifstream in(path);
  if (!in) throw InvalidInput("cost report: " + path.string() + " is missing");
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.contains("stages") || !j.contains("batch")) {
    throw InvalidInput("cost report: " + path.string() + " lacks the forward-pass counters");
  }
  const double batch = j.at("batch").get<double>();
  const bool curriculum_validates = j.value("selection", "policy") != "random";
  CostReport rep;
  for (const auto& s : j.at("stages")) {
    rep.episodes += s.at("episodes").get<std::uint64_t>();
    rep.train_steps += s.at("train_steps").get<std::uint64_t>();
    rep.train_forward += s.at("train_forward").get<std::uint64_t>();
    rep.validation_forward += s.at("validation_forward").get<std::uint64_t>();
    rep.monitor_forward += s.at("monitor_forward").get<std::uint64_t>();
    const double episodes = s.at("episodes").get<double>();
    for (const auto& t : s.at("tasks")) {
      const auto perms = t.at("perms").get<std::uint64_t>();
      const auto val = t.at("val_size").get<std::uint64_t>();
      if (curriculum_validates) {
        rep.predicted_validation_forward += s.at("episodes").get<std::uint64_t>() * 2 * perms * val;
      }
      rep.per_task.push_back(closed_form_cost(static_cast<double>(val), static_cast<double>(perms), batch,
                                              curriculum_validates ? episodes : 0.0,
                                              s.at("train_steps").get<double>()));
    }
  }
  if (rep.train_forward > 0) {
    rep.measured_overhead = static_cast<double>(rep.validation_forward) / static_cast<double>(rep.train_forward);
    rep.predicted_overhead =
        static_cast<double>(rep.predicted_validation_forward) / static_cast<double>(rep.train_forward);
  }
  return rep;
}

// ---- valsize sweep ----

std::vector<SweepRow> valsize_sweep(const RunConfig& config, const fs::path& run_dir, Task task,
                                    std::span<const std::size_t> sizes, std::size_t repeats) {
  if (repeats < 1) throw InvalidInput("valsize sweep: repeats must be >= 1");
  const toydata::Dataset data = task_dataset(config, task);
  const permset::PermutationSet perms = task_permutations(config, task);
  const std::size_t n = data.train.size();
  for (std::size_t s : sizes) {
    if (s < 1 || s > n) {
      throw InvalidInput("valsize sweep: size " + std::to_string(s) + " outside [1, " + std::to_string(n) + "]");
    }
  }
  const auto checkpoints = list_checkpoints(run_dir);
  if (checkpoints.empty()) throw InvalidInput("valsize sweep: " + run_dir.string() + " has no checkpoints");

  std::vector<SweepRow> rows;
  for (const auto& ckpt : checkpoints) {
    const auto model = load_model(config, ckpt / "model.ckpt");
    for (std::size_t size : sizes) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      nn::Rng rng(nn::derive_seed(config.seed, "valsize." + std::to_string(size)));
      rng.shuffle(order);
      std::vector<double> errors;
      for (std::size_t r = 0; r < repeats; ++r) {
        std::vector<std::size_t> ids(size);
        for (std::size_t i = 0; i < size; ++i) ids[i] = order[(r * size + i) % n];
        std::sort(ids.begin(), ids.end());
        std::vector<toydata::Sample> samples;
        samples.reserve(size);
        for (std::size_t id : ids) samples.push_back(data.train[id]);
        errors.push_back(curriculum::ordering_error(*model, task, samples, perms));
      }
      rows.push_back(SweepRow{ckpt.filename().string(), size, repeats, mean_of(errors), sample_std(errors)});
    }
  }
  return rows;
}

std::string to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "checkpoint,size,repeats,mean,std\n";
  for (const auto& r : rows) {
    out += r.checkpoint + "," + std::to_string(r.size) + "," + std::to_string(r.repeats) + "," +
           format_number(r.mean) + "," + format_number(r.std) + "\n";
  }
  return out;
}

// ---- group diagnostic ----

ordered_json GroupReport::to_json() const {
  ordered_json j;
  j["error"] = error;
  j["groups"] = grouping.group_count();
  j["assignment"] = grouping.assignment;
  j["alpha"] = diagnostic.alpha;
  j["too_many_groups"] = diagnostic.too_many_groups;
  ordered_json p = ordered_json::array();
  for (Eigen::Index r = 0; r < diagnostic.p_values.rows(); ++r) {
    std::vector<double> row(diagnostic.p_values.cols());
    for (Eigen::Index c = 0; c < diagnostic.p_values.cols(); ++c) row[static_cast<std::size_t>(c)] = diagnostic.p_values(r, c);
    p.push_back(row);
  }
  j["p_values"] = p;
  return j;
}

GroupReport diagnose_groups(const RunConfig& config, const fs::path& checkpoint, Task task, std::size_t groups,
                            double alpha) {
  const toydata::Dataset data = task_dataset(config, task);
  const permset::PermutationSet perms = task_permutations(config, task);
  if (groups < 1 || groups > perms.size()) {
    throw InvalidInput("diagnose-groups: groups must lie in [1, " + std::to_string(perms.size()) + "]");
  }
  const auto model = load_model(config, checkpoint);
  curriculum::OrderingLearner learner(*model, {{task, curriculum::TaskData{&data, &perms}}}, config.lr,
                                      config.jitter, 0);
  const curriculum::Validation v = curriculum::validate(learner, task);
  GroupReport rep;
  rep.error = v.error;
  rep.grouping = curriculum::group_permutations(v.state, groups, nn::derive_seed(config.seed, "diagnose"),
                                                config.curriculum.kmeans);
  rep.diagnostic = curriculum::group_count_diagnostic(v.state, rep.grouping, alpha);
  return rep;
}

// ---- compare ----

ordered_json CompareResult::summary_json() const {
  ordered_json j;
  j["seeds"] = ordered_json::array();
  for (const auto& r : rows) {
    if (j["seeds"].empty() || j["seeds"].back() != r.seed) j["seeds"].push_back(r.seed);
  }
  j["checkpoints"] = rows.size();
  j["policy_relative"] = {{"mean", policy_mean}, {"std", policy_std}};
  j["random_relative"] = {{"mean", 1.0}, {"std", 0.0}};
  j["inverse_relative"] = {{"mean", inverse_mean}, {"std", inverse_std}};
  j["control_relative"] = {{"mean", control_mean}, {"std", control_std}};
  return j;
}

std::string CompareResult::rows_csv() const {
  std::string out = "seed,checkpoint,learned,uniform,inverse,control\n";
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + "," + std::to_string(r.checkpoint) + "," + format_number(r.learned) + "," +
           format_number(r.uniform) + "," + format_number(r.inverse) + "," + format_number(r.control) + "\n";
  }
  return out;
}

namespace {

class CompareProbe : public curriculum::TrainingObserver {
 public:
  CompareProbe(const RunConfig& config, Environment& env, std::vector<CompareRow>& rows)
      : config_(config), env_(env), rows_(rows) {}

  void on_checkpoint(std::size_t done, const curriculum::TrainingRun& run) override {
    std::map<Task, const policy::Policy*> policies;
    std::size_t train = 0;
    for (const Task t : run.tasks()) {
      policies[t] = &run.policy(t);
      train = std::max(train, env_.data.at(t).train.size());
    }
    const std::size_t batch = config_.curriculum.batch;
    const std::size_t steps = (train + batch - 1) / batch;
    const std::string tag = std::to_string(done);
    auto accuracy = [&](policy::Mode mode, const std::string& draw_key) {
      ordering::OrderingModel copy = *env_.model;
      curriculum::OrderingLearner learner(copy, env_.task_data(), config_.lr, config_.jitter,
                                          nn::derive_seed(config_.seed, "compare.augment." + tag));
      const auto out = curriculum::train_with_fixed_policy(learner, policies, mode, steps, batch,
                                                           config_.curriculum.n_groups, config_.curriculum.kmeans,
                                                           nn::derive_seed(config_.seed, draw_key));
      double acc = 0.0;
      for (const auto& [task, e] : out.end_error) acc += 1.0 - e;
      return acc / static_cast<double>(out.end_error.size());
    };
    CompareRow row;
    row.seed = config_.seed;
    row.checkpoint = done;
    row.learned = accuracy(policy::Mode::kLearned, "compare.draws." + tag);
    row.uniform = accuracy(policy::Mode::kUniform, "compare.draws." + tag);
    row.inverse = accuracy(policy::Mode::kInverse, "compare.draws." + tag);
    row.control = accuracy(policy::Mode::kUniform, "compare.control." + tag);
    rows_.push_back(row);
  }

 private:
  const RunConfig& config_;
  Environment& env_;
  std::vector<CompareRow>& rows_;
};

}  // namespace

CompareResult cmd_compare(const RunConfig& config, std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw ConfigError("compare needs at least two seeds");
  if (config.learner != "network") throw ConfigError("compare needs learner = network");
  CompareResult result;
  for (const std::uint64_t seed : seeds) {
    RunConfig c = config;
    c.seed = seed;
    Environment env = build_environment(c);
    auto learner = make_learner(c, env);
    const auto tasks = c.tasks();
    curriculum::TrainingRun run(*learner, tasks, curriculum::Selection::kPolicy, c.curriculum, c.policy,
                                nn::derive_seed(seed, "curriculum"));
    CompareProbe probe(c, env, result.rows);
    run.run(&probe);
  }
  std::vector<double> p;
  std::vector<double> inv;
  std::vector<double> ctl;
  for (const auto& r : result.rows) {
    if (!(r.uniform > 0.0)) throw NumericError("compare: uniform-mode accuracy is zero");
    p.push_back(r.learned / r.uniform);
    inv.push_back(r.inverse / r.uniform);
    ctl.push_back(r.control / r.uniform);
  }
  result.policy_mean = mean_of(p);
  result.policy_std = sample_std(p);
  result.inverse_mean = mean_of(inv);
  result.inverse_std = sample_std(inv);
  result.control_mean = mean_of(ctl);
  result.control_std = sample_std(ctl);
  return result;
}

// ---- curves ----

std::vector<CurvePoint> error_curve(const std::vector<json>& metrics) {
  std::vector<CurvePoint> out;
  std::string key;
  std::string stage;
  double offset = 0.0;
  double last_x = 0.0;
  double sum = 0.0;
  std::size_t count = 0;
  auto flush = [&] {
    if (count > 0) out.push_back({last_x, sum / static_cast<double>(count)});
    sum = 0.0;
    count = 0;
  };
  for (const auto& e : metrics) {
    const std::string s = e.value("stage", "main");
    const std::string k = s + "/" + std::to_string(e.at("episode").get<std::size_t>()) + "/" +
                          e.at("phase").get<std::string>();
    if (k != key) {
      flush();
      if (s != stage && !stage.empty()) offset = last_x;
      key = k;
      stage = s;
    }
    last_x = offset + e.at("train_forward").get<double>();
    sum += e.at("error").get<double>();
    ++count;
  }
  flush();
  return out;
}

double trapezoid_auc(std::span<const CurvePoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].x - curve[i - 1].x) * (curve[i].error + curve[i - 1].error) / 2.0;
  }
  return area;
}

}  // namespace permrl::harness
