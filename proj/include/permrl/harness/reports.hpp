#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "permrl/curriculum/grouping.hpp"
#include "permrl/curriculum/ks.hpp"
#include "permrl/harness/config.hpp"
#include "permrl/nn/matrix.hpp"
#include "permrl/permset.hpp"

namespace permrl::harness {

/// Shortest round-trip text for a double.
std::string format_number(double v);

// ---- nearest-neighbour retrieval ----

inline constexpr std::array<std::size_t, 5> kRetrievalKs{1, 5, 10, 20, 50};

struct RetrievalReport {
  std::vector<std::size_t> ks;
  std::vector<double> accuracy;  // per k
  std::string distance = "cosine";
  std::string query_split = "test";
  std::string gallery_split = "train";
  std::size_t n_query = 0;
  std::size_t n_gallery = 0;

  nlohmann::ordered_json to_json() const;
};

/**
 * Top-k accuracy: a query counts for k when a gallery row of its class is
 * among its k nearest rows by cosine distance (1 - cos; a zero row has
 * distance 1 to everything). Distance ties go to the lower gallery index.
 * k larger than the gallery is clamped.
 */
RetrievalReport retrieval_topk(const nn::Matrix& query, std::span<const std::uint32_t> query_labels,
                               const nn::Matrix& gallery, std::span<const std::uint32_t> gallery_labels,
                               std::span<const std::size_t> ks);

/// Encoder features of the task's test split (queries) against its train
/// split (gallery), with weights from `checkpoint`.
RetrievalReport cmd_eval_nn(const RunConfig& config, const std::filesystem::path& checkpoint, curriculum::Task task);

// ---- selection reports ----

struct QuartileRow {
  std::string stage;
  std::size_t episode = 0;
  std::string task;
  std::size_t quartile = 0;  // 1 = hardest permutations
  std::size_t draws = 0;
  double frequency = 0.0;
};

/**
 * Per episode record, permutations ranked by their pre-episode error
 * (descending, ties by index) and cut into four rank quartiles; frequency is
 * the share of the episode's permutation draws landing in each quartile.
 * Four rows per record. Throws InvalidInput on an empty input.
 */
std::vector<QuartileRow> selection_quartiles(const std::vector<nlohmann::json>& episodes);

/// Draw share per quartile summed over the whole run.
std::array<double, 4> quartile_totals(const std::vector<QuartileRow>& rows);

struct HammingRow {
  std::string stage;
  std::size_t episode = 0;
  std::string task;
  std::size_t distance = 0;  // to the identity
  std::size_t draws = 0;
  double frequency = 0.0;
};

/// Episode draws binned by the Hamming distance of the drawn permutation to
/// the identity, distances 0..n for every record.
std::vector<HammingRow> selection_by_hamming(const std::vector<nlohmann::json>& episodes,
                                             const std::map<std::string, permset::PermutationSet>& perms);

std::string to_csv(const std::vector<QuartileRow>& rows);
std::string to_csv(const std::vector<HammingRow>& rows);

// ---- error heatmap ----

struct Heatmap {
  std::vector<std::size_t> perm_order;  // permutation id of each row
  std::vector<std::string> columns;     // "<stage>/<episode>/<phase>"
  nn::Matrix values;                    // rows x validations
};

/// Per-permutation validation errors of one task, rows sorted by mean error
/// (ascending, ties by permutation id). Throws InvalidInput without events.
Heatmap error_heatmap(const std::vector<nlohmann::json>& metrics, curriculum::Task task);
std::string to_csv(const Heatmap& h);

// ---- cost ----

struct CostPrediction {
  double val_size = 0;
  double perms = 0;
  double batch = 0;
  double episodes = 0;
  double iterations = 0;
  double v = 0;         // validation cost in training iterations: |X_val| |Psi| / B
  double overhead = 0;  // episodes * 2 * V / iterations
};

/// Throws InvalidInput on a non-positive batch, or zero iterations with episodes.
CostPrediction closed_form_cost(double val_size, double perms, double batch, double episodes, double iterations);

struct CostReport {
  std::uint64_t episodes = 0;
  std::uint64_t train_steps = 0;
  std::uint64_t train_forward = 0;
  std::uint64_t validation_forward = 0;
  std::uint64_t monitor_forward = 0;
  std::uint64_t predicted_validation_forward = 0;
  double measured_overhead = 0.0;   // validation_forward / train_forward
  double predicted_overhead = 0.0;  // prediction / train_forward
  std::vector<CostPrediction> per_task;  // closed form per stage and task

  nlohmann::ordered_json to_json() const;
};

/// Reads counters.json of a run. Throws InvalidInput when it is missing.
CostReport cmd_cost_report(const std::filesystem::path& run_dir);

// ---- validation-set size sweep ----

struct SweepRow {
  std::string checkpoint;
  std::size_t size = 0;
  std::size_t repeats = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single repeat
};

/**
 * For every checkpoint of the run and every size, draws `repeats` seeded
 * validation sets from the training split (disjoint while the split allows,
 * wrapping around otherwise) and reports mean and spread of the error.
 */
std::vector<SweepRow> valsize_sweep(const RunConfig& config, const std::filesystem::path& run_dir,
                                    curriculum::Task task, std::span<const std::size_t> sizes,
                                    std::size_t repeats);
std::string to_csv(const std::vector<SweepRow>& rows);

// ---- group diagnostic ----

struct GroupReport {
  double error = 0.0;
  curriculum::Grouping grouping;
  curriculum::GroupDiagnostic diagnostic;

  nlohmann::ordered_json to_json() const;
};

GroupReport diagnose_groups(const RunConfig& config, const std::filesystem::path& checkpoint, curriculum::Task task,
                            std::size_t groups, double alpha);

// ---- mode comparison ----

struct CompareRow {
  std::uint64_t seed = 0;
  std::size_t checkpoint = 0;  // episodes done
  double learned = 0.0;        // validation accuracy after one epoch-equivalent
  double uniform = 0.0;
  double inverse = 0.0;
  double control = 0.0;  // uniform again with other draws
};

struct CompareResult {
  std::vector<CompareRow> rows;
  double policy_mean = 0.0, policy_std = 0.0;  // accuracy relative to uniform
  double inverse_mean = 0.0, inverse_std = 0.0;
  double control_mean = 0.0, control_std = 0.0;

  nlohmann::ordered_json summary_json() const;
  std::string rows_csv() const;
};

/**
 * Per seed: trains in policy selection with the configured cadence; at every
 * checkpoint copies network and policies and trains one epoch-equivalent
 * (ceil(train / batch) steps) under each sampling mode from the copy, with
 * identical sample draws. Needs the network learner and at least two seeds.
 */
CompareResult cmd_compare(const RunConfig& config, std::span<const std::uint64_t> seeds);

// ---- learning curves ----

struct CurvePoint {
  double x = 0.0;  // training forward passes
  double error = 0.0;
};

/// One point per validation round: the mean error over the tasks validated
/// in that round, at the training forward-pass count of the round.
std::vector<CurvePoint> error_curve(const std::vector<nlohmann::json>& metrics);

/// Trapezoid area under the curve.
double trapezoid_auc(std::span<const CurvePoint> curve);

}  // namespace permrl::harness
