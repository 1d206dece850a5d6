#include "permrl/ordering_net.hpp"

#include <string>

#include "permrl/errors.hpp"
#include "permrl/nn/loss.hpp"
#include "permrl/nn/optim.hpp"
#include "permrl/nn/rng.hpp"

namespace permrl::ordering {

namespace {

using nn::Matrix;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// (B*P) x F  <->  B x (P*F): the same row-major buffer viewed two ways.
Matrix stack_parts(const Matrix& per_part, std::size_t batch, std::size_t parts) {
  return Eigen::Map<const Matrix>(per_part.data(), idx(batch), idx(parts) * per_part.cols());
}

Matrix unstack_parts(const Matrix& stacked, std::size_t batch, std::size_t parts) {
  return Eigen::Map<const Matrix>(stacked.data(), idx(batch * parts), stacked.cols() / idx(parts));
}

// Rows {b * parts + t : b} of a (B*P) x F matrix.
Matrix time_slice(const Matrix& per_part, std::size_t batch, std::size_t parts, std::size_t t) {
  const Eigen::Index f = per_part.cols();
  return Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>(per_part.data() + idx(t) * f, idx(batch), f,
                                                          Eigen::OuterStride<>(idx(parts) * f));
}

}  // namespace

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> out;
  auto positive = [&](std::size_t v, const char* name) {
    if (v < 1) out.push_back(std::string("model.") + name + " must be >= 1");
  };
  positive(tile_input_dim, "tile_input_dim");
  positive(frame_input_dim, "frame_input_dim");
  positive(encoder_dim, "encoder_dim");
  positive(fc6_dim, "fc6_dim");
  positive(fc7_dim, "fc7_dim");
  positive(lstm_hidden_dim, "lstm_hidden_dim");
  positive(n_perm_spatial, "n_perm_spatial");
  positive(n_perm_temporal, "n_perm_temporal");
  if (n_tiles < 2) out.push_back("model.n_tiles must be >= 2");
  if (n_frames < 2) out.push_back("model.n_frames must be >= 2");
  if (tile_input_dim != frame_input_dim) {
    out.push_back("model.tile_input_dim (" + std::to_string(tile_input_dim) + ") must equal frame_input_dim (" +
                  std::to_string(frame_input_dim) + ") for the shared encoder");
  }
  return out;
}

struct OrderingModel::Forward {
  Matrix encoded;  // (B*P) x encoder_dim
  Matrix fc6;      // (B*P) x fc6_dim
  Matrix fc7_in;   // spatial: B x (P*fc6)
  Matrix fc7;      // spatial: B x fc7
  nn::LstmCache lstm;
  Matrix head_in;  // classifier input
  Matrix logits;
};

OrderingModel::OrderingModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  if (const auto v = config.violations(); !v.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& s : v) msg += "\n  " + s;
    throw InvalidInput(msg);
  }
  nn::Rng rng(nn::derive_seed(init_seed, "ordering.init"));
  const auto& c = config_;
  encoder_ = nn::Dense(params_, "encoder", idx(c.tile_input_dim), idx(c.encoder_dim), nn::Activation::kRelu, rng);
  spatial_fc6_ = nn::Dense(params_, "spatial.fc6", idx(c.encoder_dim), idx(c.fc6_dim), nn::Activation::kRelu, rng);
  spatial_fc7_ =
      nn::Dense(params_, "spatial.fc7", idx(c.n_tiles * c.fc6_dim), idx(c.fc7_dim), nn::Activation::kRelu, rng);
  spatial_classifier_ =
      nn::Dense(params_, "spatial.classifier", idx(c.fc7_dim), idx(c.n_perm_spatial), nn::Activation::kLinear, rng);
  temporal_fc6_ = nn::Dense(params_, "temporal.fc6", idx(c.encoder_dim), idx(c.fc6_dim), nn::Activation::kRelu, rng);
  temporal_lstm_ = nn::Lstm(params_, "temporal.lstm", idx(c.fc6_dim), idx(c.lstm_hidden_dim), rng);
  temporal_classifier_ = nn::Dense(params_, "temporal.classifier", idx(c.lstm_hidden_dim), idx(c.n_perm_temporal),
                                   nn::Activation::kLinear, rng);
}

void OrderingModel::check_batch(const nn::PartBatch& batch, std::size_t parts, const char* what) const {
  if (batch.parts != parts || batch.part_dim() != config_.tile_input_dim ||
      static_cast<std::size_t>(batch.values.rows()) != batch.batch * batch.parts) {
    throw InvalidInput(std::string(what) + ": batch of " + std::to_string(batch.batch) + " x " +
                       std::to_string(batch.parts) + " parts x " + std::to_string(batch.part_dim()) +
                       " does not match the model (" + std::to_string(parts) + " parts x " +
                       std::to_string(config_.tile_input_dim) + ")");
  }
}

Matrix OrderingModel::forward_spatial(const nn::PartBatch& batch) const {
  check_batch(batch, config_.n_tiles, "forward_spatial");
  const Matrix encoded = encoder_.forward(params_, batch.values);
  const Matrix fc6 = spatial_fc6_.forward(params_, encoded);
  const Matrix fc7 = spatial_fc7_.forward(params_, stack_parts(fc6, batch.batch, batch.parts));
  return spatial_classifier_.forward(params_, fc7);
}

Matrix OrderingModel::forward_temporal(const nn::PartBatch& batch) const {
  check_batch(batch, config_.n_frames, "forward_temporal");
  const Matrix encoded = encoder_.forward(params_, batch.values);
  const Matrix fc6 = temporal_fc6_.forward(params_, encoded);
  std::vector<Matrix> steps;
  steps.reserve(batch.parts);
  for (std::size_t t = 0; t < batch.parts; ++t) steps.push_back(time_slice(fc6, batch.batch, batch.parts, t));
  const Matrix h = temporal_lstm_.forward(params_, steps);
  return temporal_classifier_.forward(params_, h);
}

double OrderingModel::accumulate_gradients(Head head, const nn::PartBatch& batch, std::span<const std::size_t> labels) {
  if (labels.size() != batch.batch) {
    throw InvalidInput("accumulate_gradients: " + std::to_string(labels.size()) + " labels for a batch of " +
                       std::to_string(batch.batch));
  }
  Forward f;
  Matrix grad_fc6;
  if (head == Head::kSpatial) {
    check_batch(batch, config_.n_tiles, "spatial step");
    f.encoded = encoder_.forward(params_, batch.values);
    f.fc6 = spatial_fc6_.forward(params_, f.encoded);
    f.fc7_in = stack_parts(f.fc6, batch.batch, batch.parts);
    f.fc7 = spatial_fc7_.forward(params_, f.fc7_in);
    f.logits = spatial_classifier_.forward(params_, f.fc7);
    const auto ce = nn::softmax_cross_entropy(f.logits, labels);
    const Matrix g_fc7 = spatial_classifier_.backward(params_, f.fc7, f.logits, ce.grad_logits);
    const Matrix g_in = spatial_fc7_.backward(params_, f.fc7_in, f.fc7, g_fc7);
    grad_fc6 = unstack_parts(g_in, batch.batch, batch.parts);
    const Matrix g_enc = spatial_fc6_.backward(params_, f.encoded, f.fc6, grad_fc6);
    encoder_.backward(params_, batch.values, f.encoded, g_enc);
    return ce.loss;
  }
  check_batch(batch, config_.n_frames, "temporal step");
  f.encoded = encoder_.forward(params_, batch.values);
  f.fc6 = temporal_fc6_.forward(params_, f.encoded);
  std::vector<Matrix> steps;
  steps.reserve(batch.parts);
  for (std::size_t t = 0; t < batch.parts; ++t) steps.push_back(time_slice(f.fc6, batch.batch, batch.parts, t));
  f.head_in = temporal_lstm_.forward(params_, steps, &f.lstm);
  f.logits = temporal_classifier_.forward(params_, f.head_in);
  const auto ce = nn::softmax_cross_entropy(f.logits, labels);
  const Matrix g_h = temporal_classifier_.backward(params_, f.head_in, f.logits, ce.grad_logits);
  const std::vector<Matrix> g_steps = temporal_lstm_.backward(params_, f.lstm, g_h);
  grad_fc6.resize(f.fc6.rows(), f.fc6.cols());
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t t = 0; t < batch.parts; ++t) grad_fc6.row(idx(b * batch.parts + t)) = g_steps[t].row(idx(b));
  }
  const Matrix g_enc = temporal_fc6_.backward(params_, f.encoded, f.fc6, grad_fc6);
  encoder_.backward(params_, batch.values, f.encoded, g_enc);
  return ce.loss;
}

DualLoss OrderingModel::train_step_dual(const TaskBatch& spatial, const TaskBatch& temporal, double lr) {
  params_.zero_grad();
  DualLoss loss;
  if (spatial.inputs != nullptr) loss.spatial = accumulate_gradients(Head::kSpatial, *spatial.inputs, spatial.labels);
  if (temporal.inputs != nullptr) {
    loss.temporal = accumulate_gradients(Head::kTemporal, *temporal.inputs, temporal.labels);
  }
  nn::sgd_step(params_, lr);
  return loss;
}

nn::RowVector OrderingModel::extract_features(const Matrix& parts) const {
  if (static_cast<std::size_t>(parts.cols()) != config_.tile_input_dim || parts.rows() < 1) {
    throw InvalidInput("extract_features: sample of shape " + std::to_string(parts.rows()) + "x" +
                       std::to_string(parts.cols()) + " does not match encoder input width " +
                       std::to_string(config_.tile_input_dim));
  }
  return encoder_.forward(params_, parts).colwise().mean();
}

Matrix OrderingModel::extract_features(const nn::PartBatch& batch) const {
  if (batch.part_dim() != config_.tile_input_dim || batch.parts < 1) {
    throw InvalidInput("extract_features: batch part width " + std::to_string(batch.part_dim()) +
                       " does not match encoder input width " + std::to_string(config_.tile_input_dim));
  }
  const Matrix encoded = encoder_.forward(params_, batch.values);
  Matrix out = Matrix::Zero(idx(batch.batch), encoded.cols());
  for (std::size_t b = 0; b < batch.batch; ++b) {
    out.row(idx(b)) = encoded.middleRows(idx(b * batch.parts), idx(batch.parts)).colwise().mean();
  }
  return out;
}

std::vector<nn::ParamId> OrderingModel::encoder_params() const { return {encoder_.weight(), encoder_.bias()}; }

std::vector<nn::ParamId> OrderingModel::spatial_params() const {
  return {spatial_fc6_.weight(),        spatial_fc6_.bias(),       spatial_fc7_.weight(),
          spatial_fc7_.bias(),          spatial_classifier_.weight(), spatial_classifier_.bias()};
}

std::vector<nn::ParamId> OrderingModel::temporal_params() const {
  return {temporal_fc6_.weight(),
          temporal_fc6_.bias(),
          temporal_lstm_.input_weight(),
          temporal_lstm_.recurrent_weight(),
          temporal_lstm_.bias(),
          temporal_classifier_.weight(),
          temporal_classifier_.bias()};
}

}  // namespace permrl::ordering
