#include "permrl/nn/layers.hpp"

#include <cmath>

#include "permrl/errors.hpp"

namespace permrl::nn {

namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  return w;
}

Dense::Dense(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Activation act,
             Rng& rng)
    : in_(in), out_(out), act_(act) {
  if (in < 1 || out < 1) throw InvalidInput("dense '" + name + "': dimensions must be positive");
  w_ = store.add(name + ".weight", glorot_uniform(in, out, rng));
  b_ = store.add(name + ".bias", Matrix::Zero(1, out));
}

Matrix Dense::forward(const ParamStore& store, const Matrix& x) const {
  if (x.cols() != in_) {
    throw InvalidInput("dense: input " + shape(x) + " does not match layer input width " + std::to_string(in_));
  }
  Matrix y = x * store.value(w_);
  y.rowwise() += store.value(b_).row(0);
  switch (act_) {
    case Activation::kLinear:
      break;
    case Activation::kRelu:
      y = y.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      y = y.array().tanh().matrix();
      break;
  }
  return y;
}

Matrix Dense::backward(ParamStore& store, const Matrix& x, const Matrix& y, const Matrix& grad_y) const {
  if (grad_y.rows() != x.rows() || grad_y.cols() != out_ || y.rows() != x.rows() || x.cols() != in_) {
    throw InvalidInput("dense backward: shapes x " + shape(x) + ", y " + shape(y) + ", dy " + shape(grad_y));
  }
  Matrix g_pre;
  switch (act_) {
    case Activation::kLinear:
      g_pre = grad_y;
      break;
    case Activation::kRelu:
      g_pre = (y.array() > 0.0).select(grad_y, 0.0);
      break;
    case Activation::kTanh:
      g_pre = (grad_y.array() * (1.0 - y.array().square())).matrix();
      break;
  }
  store.grad(w_) += (x.transpose() * g_pre).eval();
  store.grad(b_) += g_pre.colwise().sum();
  return g_pre * store.value(w_).transpose();
}

Lstm::Lstm(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng)
    : in_(in), hidden_(hidden) {
  if (in < 1 || hidden < 1) throw InvalidInput("lstm '" + name + "': dimensions must be positive");
  wx_ = store.add(name + ".input_weight", glorot_uniform(in, 4 * hidden, rng));
  wh_ = store.add(name + ".recurrent_weight", glorot_uniform(hidden, 4 * hidden, rng));
  Matrix b = Matrix::Zero(1, 4 * hidden);
  b.block(0, hidden, 1, hidden).setOnes();  // forget gate starts open
  b_ = store.add(name + ".bias", std::move(b));
}

Matrix Lstm::forward(const ParamStore& store, std::span<const Matrix> inputs, LstmCache* cache) const {
  if (inputs.empty()) throw InvalidInput("lstm: empty input sequence");
  const Eigen::Index batch = inputs[0].rows();
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].cols() != in_ || inputs[t].rows() != batch) {
      throw InvalidInput("lstm: step " + std::to_string(t) + " input " + shape(inputs[t]) + ", expected " +
                         std::to_string(batch) + "x" + std::to_string(in_));
    }
  }
  const Eigen::Index H = hidden_;
  Matrix h = Matrix::Zero(batch, H);
  Matrix c = Matrix::Zero(batch, H);
  if (cache) {
    cache->x.assign(inputs.begin(), inputs.end());
    cache->h.assign(1, h);
    cache->c.assign(1, c);
    cache->gates.clear();
  }
  const Matrix& wx = store.value(wx_);
  const Matrix& wh = store.value(wh_);
  const auto bias = store.value(b_).row(0);
  for (const Matrix& x : inputs) {
    Matrix z = x * wx;
    z.noalias() += h * wh;
    z.rowwise() += bias;
    Matrix gates(batch, 4 * H);
    gates.leftCols(2 * H) = sigmoid(z.leftCols(2 * H));
    gates.middleCols(2 * H, H) = z.middleCols(2 * H, H).array().tanh().matrix();
    gates.rightCols(H) = sigmoid(z.rightCols(H));
    c = (gates.middleCols(H, H).array() * c.array() + gates.leftCols(H).array() * gates.middleCols(2 * H, H).array())
            .matrix();
    h = (gates.rightCols(H).array() * c.array().tanh()).matrix();
    if (cache) {
      cache->gates.push_back(std::move(gates));
      cache->h.push_back(h);
      cache->c.push_back(c);
    }
  }
  return h;
}

std::vector<Matrix> Lstm::backward(ParamStore& store, const LstmCache& cache, const Matrix& grad_h_final) const {
  const std::size_t T = cache.x.size();
  if (T == 0 || cache.h.size() != T + 1 || cache.c.size() != T + 1 || cache.gates.size() != T) {
    throw InvalidInput("lstm backward: cache does not hold a complete forward pass");
  }
  const Eigen::Index H = hidden_;
  if (grad_h_final.rows() != cache.h.back().rows() || grad_h_final.cols() != H) {
    throw InvalidInput("lstm backward: upstream gradient " + shape(grad_h_final));
  }
  const Matrix& wx = store.value(wx_);
  const Matrix& wh = store.value(wh_);
  Matrix& gwx = store.grad(wx_);
  Matrix& gwh = store.grad(wh_);
  Matrix& gb = store.grad(b_);

  std::vector<Matrix> grad_x(T);
  Matrix dh = grad_h_final;
  Matrix dc = Matrix::Zero(dh.rows(), H);
  Matrix dz(dh.rows(), 4 * H);
  for (std::size_t step = T; step-- > 0;) {
    const Matrix& gates = cache.gates[step];
    const auto i = gates.leftCols(H).array();
    const auto f = gates.middleCols(H, H).array();
    const auto g = gates.middleCols(2 * H, H).array();
    const auto o = gates.rightCols(H).array();
    const Eigen::ArrayXXd tc = cache.c[step + 1].array().tanh();

    dc.array() += dh.array() * o * (1.0 - tc.square());
    dz.leftCols(H) = (dc.array() * g * i * (1.0 - i)).matrix();
    dz.middleCols(H, H) = (dc.array() * cache.c[step].array() * f * (1.0 - f)).matrix();
    dz.middleCols(2 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
    dz.rightCols(H) = (dh.array() * tc * o * (1.0 - o)).matrix();

    gwx += (cache.x[step].transpose() * dz).eval();
    gwh += (cache.h[step].transpose() * dz).eval();
    gb += dz.colwise().sum();
    grad_x[step] = dz * wx.transpose();
    dh = dz * wh.transpose();
    dc = (dc.array() * f).matrix();
  }
  return grad_x;
}

}  // namespace permrl::nn
