// Independent brute-force oracles for the numeric tests. Everything here is
// written as directly as possible from the operation definitions (plain
// nested loops, no shared code with the library kernels).
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lgg/ops.hpp"
#include "lgg/tensor.hpp"

namespace oracle {

inline lgg::Tensor random_tensor(std::vector<std::int64_t> shape, std::mt19937_64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  lgg::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = uni(rng);
  return t;
}

// y[t][r][o] = sum_k x[r][o*stride+k] * w[t][k] + b[t]
inline lgg::Tensor conv1d(const lgg::Tensor& x, const lgg::Tensor& w, const lgg::Tensor& b,
                          std::int64_t stride) {
  const std::int64_t rows = x.extent(0), len = x.extent(1);
  const std::int64_t t = w.extent(0), kw = w.extent(1);
  const std::int64_t out_len = (len - kw) / stride + 1;
  lgg::Tensor y({t, rows, out_len});
  for (std::int64_t ti = 0; ti < t; ++ti)
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t o = 0; o < out_len; ++o) {
        double acc = b[ti];
        for (std::int64_t k = 0; k < kw; ++k) acc += x.at({r, o * stride + k}) * w.at({ti, k});
        y.at({ti, r, o}) = acc;
      }
  return y;
}

inline lgg::Tensor avg_pool_rows(const lgg::Tensor& x, std::int64_t window, std::int64_t stride) {
  const std::int64_t len = x.extent(x.rank() - 1);
  const std::int64_t rows = x.size() / len;
  const std::int64_t out_len = (len - window) / stride + 1;
  std::vector<std::int64_t> shape = x.shape();
  shape.back() = out_len;
  lgg::Tensor y(shape);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t o = 0; o < out_len; ++o) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < window; ++k) acc += x[r * len + o * stride + k];
      y[r * out_len + o] = acc / static_cast<double>(window);
    }
  return y;
}

inline lgg::Tensor matmul(const lgg::Tensor& a, const lgg::Tensor& b) {
  const std::int64_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  lgg::Tensor c({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += a.at({i, p}) * b.at({p, j});
      c.at({i, j}) = acc;
    }
  return c;
}

inline double max_abs_diff(const lgg::Tensor& a, const lgg::Tensor& b) {
  if (a.shape() != b.shape()) return 1e300;
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Gradient check harness for a recorded op: builds loss = sum(r .* f(inputs))
// with fixed random coefficients, takes analytic gradients via the tape, and
// compares against central differences through the same scalar function.
//
// `run` must evaluate the op on the supplied inputs and graph (nullptr for
// the pure finite-difference evaluations).
inline double check_op_gradients(
    const std::function<lgg::Tensor(std::vector<lgg::Tensor>&, lgg::Graph*)>& run,
    std::vector<lgg::Tensor> inputs, std::mt19937_64& rng, double eps = 1e-5) {
  // analytic pass
  lgg::Graph g;
  std::vector<lgg::Tensor> tracked = inputs;
  for (lgg::Tensor& t : tracked) g.track(t);
  lgg::Tensor out = run(tracked, &g);
  lgg::Tensor coeff = random_tensor(out.shape(), rng);
  lgg::Tensor loss = lgg::ops::reduce_sum(lgg::ops::hadamard(out, coeff, &g), &g);
  g.backward(loss);

  // flatten all inputs into one point
  std::vector<double> point, analytic;
  for (lgg::Tensor& t : tracked) {
    const lgg::Tensor grad = g.grad(t.node);
    for (std::int64_t i = 0; i < t.size(); ++i) {
      point.push_back(t[i]);
      analytic.push_back(grad[i]);
    }
  }

  auto eval = [&](const std::vector<double>& flat) {
    std::vector<lgg::Tensor> local = inputs;
    std::size_t pos = 0;
    for (lgg::Tensor& t : local) {
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = flat[pos++];
    }
    lgg::Tensor value = run(local, nullptr);
    double acc = 0.0;
    for (std::int64_t i = 0; i < value.size(); ++i) acc += value[i] * coeff[i];
    return acc;
  };

  return lgg::finite_diff_check(eval, point, analytic, eps);
}

}  // namespace oracle
