#include "permrl/nn/optim.hpp"

#include <cmath>
#include <string>

#include "permrl/errors.hpp"

namespace permrl::nn {

namespace {

void require_finite_grads(const ParamStore& store) {
  for (const auto& p : store) {
    if (!p.grad.allFinite()) {
      throw NumericError("non-finite gradient in tensor '" + p.name + "' at update " +
                         std::to_string(store.updates() + 1));
    }
  }
}

void require_finite_values(const ParamStore& store) {
  for (const auto& p : store) {
    if (!p.value.allFinite()) {
      throw NumericError("non-finite value in tensor '" + p.name + "' after update " +
                         std::to_string(store.updates()));
    }
  }
}

}  // namespace

void sgd_step(ParamStore& store, double lr) {
  require_finite_grads(store);
  for (auto& p : store) p.value -= lr * p.grad;
  store.zero_grad();
  store.mark_update();
  require_finite_values(store);
}

void Adam::step(ParamStore& store, double lr) {
  require_finite_grads(store);
  if (m_.size() != store.size()) {
    m_.clear();
    v_.clear();
    for (const auto& p : store) {
      m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < store.size(); ++k) {
    auto& p = store[k];
    m_[k] = options_.beta1 * m_[k] + (1.0 - options_.beta1) * p.grad;
    v_[k] = options_.beta2 * v_[k] + (1.0 - options_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + options_.epsilon);
  }
  store.zero_grad();
  store.mark_update();
  require_finite_values(store);
}

}  // namespace permrl::nn
