#pragma once

/**
 * @file ordering_net.hpp
 * @brief Dual-head ordering network.
 *
 * A shared per-part encoder feeds two classifiers over permutation indices:
 *  - spatial: encoder -> fc6 per tile -> tiles concatenated in order -> fc7 -> logits
 *  - temporal: encoder -> fc6 per frame -> LSTM over frames -> final hidden -> logits
 * Both heads backpropagate into the same encoder tensors.
 */

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "permrl/nn/layers.hpp"
#include "permrl/nn/matrix.hpp"
#include "permrl/nn/param_store.hpp"
#include "permrl/nn/part_batch.hpp"

namespace permrl::ordering {

struct ModelConfig {
  std::size_t tile_input_dim = 64;
  std::size_t frame_input_dim = 64;
  std::size_t encoder_dim = 64;
  std::size_t fc6_dim = 64;
  std::size_t fc7_dim = 128;
  std::size_t lstm_hidden_dim = 32;
  std::size_t n_tiles = 4;
  std::size_t n_frames = 4;
  std::size_t n_perm_spatial = 24;
  std::size_t n_perm_temporal = 24;

  /// Collects every violated constraint (dims >= 1, shared encoder needs
  /// tile_input_dim == frame_input_dim).
  std::vector<std::string> violations() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class Head { kSpatial, kTemporal };

struct TaskBatch {
  const nn::PartBatch* inputs = nullptr;
  std::span<const std::size_t> labels;
};

struct DualLoss {
  std::optional<double> spatial;
  std::optional<double> temporal;
};

class OrderingModel {
 public:
  /// Throws InvalidInput if the config has violations.
  OrderingModel(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const noexcept { return config_; }
  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }

  /// B x n_perm_spatial logits. Throws InvalidInput on shape mismatch.
  nn::Matrix forward_spatial(const nn::PartBatch& batch) const;
  /// B x n_perm_temporal logits.
  nn::Matrix forward_temporal(const nn::PartBatch& batch) const;
  nn::Matrix forward(Head head, const nn::PartBatch& batch) const {
    return head == Head::kSpatial ? forward_spatial(batch) : forward_temporal(batch);
  }

  /// Mean cross-entropy of one head; gradients are added to the store
  /// without stepping.
  double accumulate_gradients(Head head, const nn::PartBatch& batch, std::span<const std::size_t> labels);

  /// One SGD step on the unit-weighted sum of whichever task losses are
  /// given. Returns the per-task losses measured before the step.
  DualLoss train_step_dual(const TaskBatch& spatial, const TaskBatch& temporal, double lr);

  /// Shared-encoder output mean-pooled over the sample's parts (encoder_dim).
  /// Input rows are the sample's normalized parts.
  nn::RowVector extract_features(const nn::Matrix& parts) const;
  /// One feature row per sample of the batch.
  nn::Matrix extract_features(const nn::PartBatch& batch) const;

  /// Tensor ids by role, for tests and checkpoint diffs.
  std::vector<nn::ParamId> encoder_params() const;
  std::vector<nn::ParamId> spatial_params() const;
  std::vector<nn::ParamId> temporal_params() const;

 private:
  struct Forward;
  void check_batch(const nn::PartBatch& batch, std::size_t parts, const char* what) const;

  ModelConfig config_;
  nn::ParamStore params_;
  nn::Dense encoder_;
  nn::Dense spatial_fc6_;
  nn::Dense spatial_fc7_;
  nn::Dense spatial_classifier_;
  nn::Dense temporal_fc6_;
  nn::Lstm temporal_lstm_;
  nn::Dense temporal_classifier_;
};

}  // namespace permrl::ordering
