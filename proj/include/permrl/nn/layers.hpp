#pragma once

#include <span>
#include <string>
#include <vector>

#include "permrl/nn/matrix.hpp"
#include "permrl/nn/param_store.hpp"
#include "permrl/nn/rng.hpp"

namespace permrl::nn {

enum class Activation { kLinear, kRelu, kTanh };

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

/// y = act(x W + b). W is in x out, b is 1 x out.
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Activation act, Rng& rng);

  Eigen::Index in_dim() const noexcept { return in_; }
  Eigen::Index out_dim() const noexcept { return out_; }
  ParamId weight() const noexcept { return w_; }
  ParamId bias() const noexcept { return b_; }
  Activation activation() const noexcept { return act_; }

  /// Throws InvalidInput when x.cols() != in_dim().
  Matrix forward(const ParamStore& store, const Matrix& x) const;

  /// Accumulates dW, db into the store and returns dL/dx. `x` and `y` are
  /// the forward input and output; `grad_y` is dL/dy.
  Matrix backward(ParamStore& store, const Matrix& x, const Matrix& y, const Matrix& grad_y) const;

 private:
  ParamId w_ = 0;
  ParamId b_ = 0;
  Eigen::Index in_ = 0;
  Eigen::Index out_ = 0;
  Activation act_ = Activation::kLinear;
};

/// Everything the backward pass through a sequence needs.
struct LstmCache {
  std::vector<Matrix> x;      // T inputs, B x in
  std::vector<Matrix> h;      // T+1 hidden states, h[0] = 0
  std::vector<Matrix> c;      // T+1 cell states, c[0] = 0
  std::vector<Matrix> gates;  // T activated gates, B x 4H laid out [i | f | g | o]
};

/**
 * Single-layer LSTM. Gates i, f, o are sigmoids, the candidate g is tanh:
 *   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t),
 * with zero initial hidden and cell state. Parameters: Wx (in x 4H),
 * Wh (H x 4H), b (1 x 4H).
 */
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng);

  Eigen::Index in_dim() const noexcept { return in_; }
  Eigen::Index hidden_dim() const noexcept { return hidden_; }
  ParamId input_weight() const noexcept { return wx_; }
  ParamId recurrent_weight() const noexcept { return wh_; }
  ParamId bias() const noexcept { return b_; }

  /// Returns the final hidden state (B x H). Throws InvalidInput on an empty
  /// sequence or inconsistent input shapes.
  Matrix forward(const ParamStore& store, std::span<const Matrix> inputs, LstmCache* cache = nullptr) const;

  /// Backpropagation through time from dL/dh_T. Accumulates parameter
  /// gradients and returns dL/dx_t for every step.
  std::vector<Matrix> backward(ParamStore& store, const LstmCache& cache, const Matrix& grad_h_final) const;

 private:
  ParamId wx_ = 0;
  ParamId wh_ = 0;
  ParamId b_ = 0;
  Eigen::Index in_ = 0;
  Eigen::Index hidden_ = 0;
};

}  // namespace permrl::nn
