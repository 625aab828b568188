#include <doctest.h>

#include <random>

#include "lgg/errors.hpp"
#include "lgg/ops.hpp"
#include "oracles.hpp"

using namespace lgg;

TEST_CASE("backward of x^2 at x = 3 gives 6") {
  Graph g;
  Tensor x = Tensor::scalar(3.0);
  g.track(x);
  Tensor sq = ops::hadamard(x, x, &g);
  g.backward(sq);
  CHECK(g.grad(x.node).item() == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("constant loss leaves all gradients at zero") {
  Graph g;
  Tensor x = Tensor::scalar(5.0);
  g.track(x);
  Tensor c = Tensor::scalar(1.0);
  c.node = g.make_node({});  // constant node, nothing recorded into it
  g.backward(c);
  CHECK(g.grad(x.node).item() == 0.0);
  CHECK_FALSE(g.touched(x.node));
}

TEST_CASE("a graph can be consumed only once") {
  Graph g;
  Tensor x = Tensor::scalar(2.0);
  g.track(x);
  Tensor y = ops::hadamard(x, x, &g);
  g.backward(y);
  CHECK_THROWS_AS(g.backward(y), Error);
  CHECK_THROWS_AS(g.make_node({1}), Error);
}

TEST_CASE("backward requires a scalar loss from this graph") {
  Graph g;
  Tensor v({3}, {1, 2, 3});
  g.track(v);
  CHECK_THROWS_AS(g.backward(v), ShapeError);

  Graph g2;
  Tensor detached = Tensor::scalar(1.0);
  CHECK_THROWS_AS(g2.backward(detached), Error);
}

TEST_CASE("gradients accumulate across fan-out") {
  Graph g;
  Tensor x = Tensor::scalar(4.0);
  g.track(x);
  Tensor a = ops::hadamard(x, x, &g);          // x^2
  Tensor b = ops::add(a, x, &g);               // x^2 + x
  g.backward(b);
  CHECK(g.grad(x.node).item() == doctest::Approx(9.0).epsilon(1e-15));  // 2x + 1
}

TEST_CASE("finite_diff_check calibration cases") {
  auto square = [](const std::vector<double>& p) { return p[0] * p[0]; };
  CHECK(finite_diff_check(square, {3.0}, {6.0}, 1e-5) < 1e-6);

  auto linear = [](const std::vector<double>& p) { return 2.5 * p[0] - 1.5 * p[1]; };
  CHECK(finite_diff_check(linear, {0.7, -0.3}, {2.5, -1.5}, 1e-5) < 1e-10);

  auto leaky = [](const std::vector<double>& p) { return p[0] >= 0 ? p[0] : 0.01 * p[0]; };
  CHECK(finite_diff_check(leaky, {2.0}, {1.0}, 1e-5) < 1e-6);
  CHECK(finite_diff_check(leaky, {-2.0}, {0.01}, 1e-5) < 1e-6);

  CHECK_THROWS_AS(finite_diff_check(square, {1.0}, {2.0}, 0.0), ConfigError);
  auto bad = [](const std::vector<double>&) { return std::nan(""); };
  CHECK_THROWS_AS(finite_diff_check(bad, {1.0}, {0.0}, 1e-5), Error);
}

TEST_CASE("every recorded op family passes a randomized gradient check") {
  // one composite touching conv, pool, activation, matmul, elementwise
  std::mt19937_64 rng(31);
  auto run = [](std::vector<Tensor>& in, Graph* g) {
    Tensor conv = ops::conv1d_valid(in[0], in[1], in[2], 1, g);
    Tensor act = ops::activation(conv, Activation::LeakyRelu, 0.01, g);
    Tensor pooled = ops::avg_pool1d(act, 2, 2, g);
    Tensor flat = ops::reshape(pooled, {pooled.extent(0) * pooled.extent(1), pooled.extent(2)}, g);
    Tensor mixed = ops::matmul(flat, in[3], g);
    return ops::subtract(mixed, in[4], g);
  };
  Tensor x = oracle::random_tensor({2, 13}, rng);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] += (x[i] >= 0 ? 0.6 : -0.6);
  const double err = oracle::check_op_gradients(
      run,
      {x, oracle::random_tensor({3, 4}, rng), oracle::random_tensor({3}, rng),
       oracle::random_tensor({5, 4}, rng), oracle::random_tensor({6, 1}, rng)},
      rng);
  CHECK(err < 1e-4);
}
