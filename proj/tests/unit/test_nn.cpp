#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "permrl/errors.hpp"
#include "permrl/nn/grad_check.hpp"
#include "permrl/nn/layers.hpp"
#include "permrl/nn/loss.hpp"
#include "permrl/nn/optim.hpp"
#include "permrl/nn/param_store.hpp"
#include "permrl/nn/rng.hpp"

using namespace permrl;
using namespace permrl::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "permrl_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("rng streams are reproducible and forks differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42, 50);
  Rng d(42);
  for (int i = 0; i < 50; ++i) d.next_u64();
  CHECK(c.next_u64() == d.next_u64());
  CHECK(derive_seed(1, "data") != derive_seed(1, "init"));
  CHECK(derive_seed(1, "data") == derive_seed(1, "data"));

  Rng u(3);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    sum += x;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[u.below(7)];
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("dense layer forward cases") {
  ParamStore store;
  Rng rng(1);
  Dense layer(store, "d", 3, 3, Activation::kLinear, rng);
  Matrix x = random_matrix(4, 3, rng);
  store.value(layer.weight()).setZero();
  store.value(layer.bias()).setZero();
  CHECK(layer.forward(store, x).isZero(0.0));
  store.value(layer.weight()).setIdentity();
  CHECK(layer.forward(store, x) == x);
  CHECK_THROWS_AS(layer.forward(store, Matrix::Zero(2, 4)), InvalidInput);
}

TEST_CASE("dense backward agrees with finite differences") {
  for (auto act : {Activation::kLinear, Activation::kTanh, Activation::kRelu}) {
    ParamStore store;
    Rng rng(11);
    Dense layer(store, "d", 5, 7, act, rng);
    const Matrix x = random_matrix(3, 5, rng);
    const Matrix w = random_matrix(3, 7, rng);
    // Loss = sum(y .* w), so dL/dy = w.
    auto loss = [&](ParamStore& s, bool with_grad) {
      const Matrix y = layer.forward(s, x);
      if (with_grad) layer.backward(s, x, y, w);
      return (y.array() * w.array()).sum();
    };
    const auto rep = grad_check(store, loss, 1e-6);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-6);
  }
}

TEST_CASE("dense input gradient agrees with finite differences") {
  ParamStore store;
  Rng rng(12);
  Dense layer(store, "d", 5, 7, Activation::kTanh, rng);
  Matrix x = random_matrix(2, 5, rng);
  const Matrix w = random_matrix(2, 7, rng);
  const Matrix y = layer.forward(store, x);
  const Matrix gx = layer.backward(store, x, y, w);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double num = ((layer.forward(store, xp).array() * w.array()).sum() -
                        (layer.forward(store, xm).array() * w.array()).sum()) /
                       (2 * h);
    CHECK(gx.data()[i] == doctest::Approx(num).epsilon(1e-6));
  }
}

TEST_CASE("lstm forward cases") {
  ParamStore store;
  Rng rng(5);
  Lstm lstm(store, "l", 3, 4, rng);
  std::vector<Matrix> seq{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
  for (auto& p : store) p.value.setZero();
  CHECK(lstm.forward(store, seq).isZero(0.0));
  CHECK_THROWS_AS(lstm.forward(store, std::vector<Matrix>{}), InvalidInput);
  std::vector<Matrix> bad{random_matrix(2, 3, rng), random_matrix(2, 2, rng)};
  CHECK_THROWS_AS(lstm.forward(store, bad), InvalidInput);
}

TEST_CASE("lstm single step matches a hand-computed cell") {
  ParamStore store;
  Rng rng(6);
  Lstm lstm(store, "l", 3, 2, rng);
  const Matrix x = random_matrix(1, 3, rng);
  const Matrix h = lstm.forward(store, std::vector<Matrix>{x});
  const Matrix z = x * store.value(lstm.input_weight()) + store.value(lstm.bias());
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int j = 0; j < 2; ++j) {
    const double i = sig(z(0, j)), g = std::tanh(z(0, 4 + j)), o = sig(z(0, 6 + j));
    CHECK(h(0, j) == doctest::Approx(o * std::tanh(i * g)).epsilon(1e-12));
  }
}

TEST_CASE("lstm backward agrees with finite differences") {
  ParamStore store;
  Rng rng(21);
  Lstm lstm(store, "l", 5, 8, rng);
  std::vector<Matrix> seq;
  for (int t = 0; t < 4; ++t) seq.push_back(random_matrix(3, 5, rng));
  const Matrix w = random_matrix(3, 8, rng);
  auto loss = [&](ParamStore& s, bool with_grad) {
    LstmCache cache;
    const Matrix h = lstm.forward(s, seq, &cache);
    if (with_grad) lstm.backward(s, cache, w);
    return (h.array() * w.array()).sum();
  };
  const auto rep = grad_check(store, loss, 1e-4);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("softmax values") {
  const auto p = softmax(std::vector<double>{0, 0});
  CHECK(p[0] == doctest::Approx(0.5));
  const auto q = softmax(std::vector<double>{std::log(1.0), std::log(2.0), std::log(7.0)});
  CHECK(q[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(q[2] == doctest::Approx(0.7).epsilon(1e-12));

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(6), zs(6);
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = rng.uniform(-5, 5);
      zs[i] = z[i] + 1000.0;
    }
    const auto a = softmax(z), b = softmax(zs);
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) < 1e-12);
      CHECK(a[i] > 0);
      sum += a[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  const auto extreme = softmax(std::vector<double>{1e6, -1e6, 0});
  for (double v : extreme) CHECK(std::isfinite(v));
}

TEST_CASE("cross entropy values and gradient") {
  const std::vector<double> uniform(10, 0.1);
  CHECK(cross_entropy(uniform, 3).loss == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK(cross_entropy(std::vector<double>{0, 1, 0}, 1).loss == 0.0);
  CHECK(cross_entropy(std::vector<double>{1, 0}, 1).loss == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy(uniform, 10), InvalidInput);

  const std::vector<double> z{0.3, -1.2, 2.0, 0.1};
  const auto ce = cross_entropy(softmax(z), 2);
  const double h = 1e-6;
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const double num = (cross_entropy(softmax(zp), 2).loss - cross_entropy(softmax(zm), 2).loss) / (2 * h);
    CHECK(std::abs(ce.grad_logits[i] - num) / std::max(std::abs(num), 1e-6) < 1e-6);
  }
}

TEST_CASE("dense softmax cross-entropy stack passes the gradient check") {
  ParamStore store;
  Rng rng(31);
  Dense l1(store, "l1", 6, 9, Activation::kTanh, rng);
  Dense l2(store, "l2", 9, 5, Activation::kLinear, rng);
  const Matrix x = random_matrix(4, 6, rng);
  const std::vector<std::size_t> targets{0, 3, 4, 1};
  auto loss = [&](ParamStore& s, bool with_grad) {
    const Matrix h = l1.forward(s, x);
    const Matrix z = l2.forward(s, h);
    const auto ce = softmax_cross_entropy(z, targets);
    if (with_grad) {
      const Matrix gh = l2.backward(s, h, z, ce.grad_logits);
      l1.backward(s, x, h, gh);
    }
    return ce.loss;
  };
  const auto rep = grad_check(store, loss, 1e-6);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("grad check reports a corrupted backward") {
  ParamStore store;
  Rng rng(41);
  Dense layer(store, "d", 4, 3, Activation::kLinear, rng);
  const Matrix x = random_matrix(2, 4, rng);
  auto loss = [&](ParamStore& s, bool with_grad) {
    const Matrix y = layer.forward(s, x);
    if (with_grad) layer.backward(s, x, y, -Matrix::Ones(2, 3));
    return y.sum();
  };
  const auto rep = grad_check(store, loss, 1e-6);
  CHECK_FALSE(rep.passed);
  CHECK(rep.max_rel_error > 1.0);
}

TEST_CASE("sgd step") {
  ParamStore store;
  const auto id = store.add("w", Matrix::Constant(1, 1, 1.0));
  store.grad(id)(0, 0) = 2.0;
  sgd_step(store, 0.1);
  CHECK(store.value(id)(0, 0) == doctest::Approx(0.8));
  CHECK(store.grad(id)(0, 0) == 0.0);
  CHECK(store.updates() == 1);

  ParamStore q;
  const auto w = q.add("w", Matrix::Zero(1, 1));
  for (int i = 0; i < 100; ++i) {
    q.grad(w)(0, 0) = 2.0 * (q.value(w)(0, 0) - 3.0);
    sgd_step(q, 0.1);
  }
  CHECK(std::abs(q.value(w)(0, 0) - 3.0) < 1e-4);
}

TEST_CASE("non-finite gradient aborts the step and names the tensor") {
  ParamStore store;
  const auto id = store.add("weights", Matrix::Constant(1, 2, 1.0));
  store.grad(id)(0, 1) = std::nan("");
  try {
    sgd_step(store, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("weights") != std::string::npos);
  }
  CHECK(store.value(id)(0, 0) == 1.0);
  Adam adam;
  CHECK_THROWS_AS(adam.step(store, 0.1), NumericError);
}

TEST_CASE("adam first step moves by lr regardless of gradient scale") {
  for (double g : {1e-3, 1.0, 1e3}) {
    ParamStore store;
    const auto id = store.add("w", Matrix::Zero(1, 1));
    store.grad(id)(0, 0) = g;
    Adam adam;
    adam.step(store, 0.01);
    CHECK(store.value(id)(0, 0) == doctest::Approx(-0.01).epsilon(1e-4));
    CHECK(adam.steps() == 1);
  }
}

TEST_CASE("adam converges on a quadratic") {
  ParamStore store;
  const auto id = store.add("w", Matrix::Zero(1, 1));
  Adam adam;
  for (int i = 0; i < 2000; ++i) {
    store.grad(id)(0, 0) = 2.0 * (store.value(id)(0, 0) - 3.0);
    adam.step(store, 0.05);
  }
  CHECK(std::abs(store.value(id)(0, 0) - 3.0) < 1e-3);
}

TEST_CASE("identical seeds give bit-identical training") {
  auto train = [] {
    ParamStore store;
    Rng rng(9);
    Dense l1(store, "l1", 4, 6, Activation::kRelu, rng);
    Dense l2(store, "l2", 6, 3, Activation::kLinear, rng);
    Rng data(10);
    Adam adam;
    for (int step = 0; step < 20; ++step) {
      const Matrix x = random_matrix(5, 4, data);
      const std::vector<std::size_t> t{0, 1, 2, 1, 0};
      const Matrix h = l1.forward(store, x);
      const Matrix z = l2.forward(store, h);
      const auto ce = softmax_cross_entropy(z, t);
      l1.backward(store, x, h, l2.backward(store, h, z, ce.grad_logits));
      adam.step(store, 0.01);
    }
    return store;
  };
  const auto a = train(), b = train();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value == b[i].value);
}

TEST_CASE("param store names and checkpoint round trip") {
  ParamStore store;
  Rng rng(3);
  store.add("a", random_matrix(2, 3, rng));
  store.add("b", random_matrix(1, 4, rng));
  CHECK_THROWS_AS(store.add("a", Matrix::Zero(1, 1)), InvalidInput);
  CHECK(store.find("b").value() == 1);
  CHECK_FALSE(store.find("c").has_value());
  CHECK(store.scalar_count() == 10);
  CHECK(store.grad(0).rows() == 2);

  const auto path = temp_file("store.ckpt");
  save_checkpoint(store, path);
  const auto raw = read_checkpoint(path);
  REQUIRE(raw.size() == 2);
  CHECK(raw[0].first == "a");
  CHECK(raw[1].second == store.value(1));

  ParamStore other;
  other.add("a", Matrix::Zero(2, 3));
  other.add("b", Matrix::Zero(1, 4));
  load_checkpoint(other, path);
  CHECK(other.value(0) == store.value(0));

  ParamStore wrong;
  wrong.add("a", Matrix::Zero(3, 2));
  wrong.add("b", Matrix::Zero(1, 4));
  CHECK_THROWS_AS(load_checkpoint(wrong, path), InvalidInput);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK_THROWS_AS(read_checkpoint(path), ParseError);
}
