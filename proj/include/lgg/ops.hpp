#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lgg/graph.hpp"
#include "lgg/rng.hpp"
#include "lgg/tensor.hpp"

namespace lgg {

enum class Mode { Train, Eval };
enum class Activation { Relu, LeakyRelu };

// Running statistics for one batch-norm site; shape [feature extent].
struct BatchNormState {
  Tensor mean;
  Tensor var;

  static BatchNormState identity(std::int64_t features);
};

namespace ops {

// All ops compute eagerly; when `g` is non-null and any input is tracked,
// they append their backward step to the tape and tag the output tensor.
// With g == nullptr they are plain value functions.

// input: rows x len, kernels: t x kw, bias: [t] -> t x rows x out_len,
// out_len = floor((len - kw) / stride) + 1, no padding.
Tensor conv1d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                    std::int64_t stride, Graph* g = nullptr);

// Pools the trailing axis; out_len = floor((len - window) / stride) + 1.
Tensor avg_pool1d(const Tensor& input, std::int64_t window, std::int64_t stride,
                  Graph* g = nullptr);

Tensor activation(const Tensor& input, Activation kind, double slope, Graph* g = nullptr);

// Normalizes per index of `feature_axis` with statistics over all other
// axes. Train mode uses batch statistics (biased variance) and updates the
// running stats by exponential moving average; eval mode applies the stored
// running stats.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode, int feature_axis, double eps,
                  double momentum, Graph* g = nullptr);

Tensor matmul(const Tensor& a, const Tensor& b, Graph* g = nullptr);

// a: m x p, x: batch x p x n -> batch x m x n (shared left factor).
Tensor left_matmul_batched(const Tensor& a, const Tensor& x, Graph* g = nullptr);

// Elementwise with numpy-style broadcasting (align trailing axes, extent-1
// broadcasts). Gradients reduce-sum over broadcast axes.
Tensor hadamard(const Tensor& a, const Tensor& b, Graph* g = nullptr);
Tensor add(const Tensor& a, const Tensor& b, Graph* g = nullptr);
Tensor subtract(const Tensor& a, const Tensor& b, Graph* g = nullptr);

Tensor concat(const std::vector<Tensor>& parts, int axis, Graph* g = nullptr);

Tensor reshape(const Tensor& input, std::vector<std::int64_t> new_shape, Graph* g = nullptr);

Tensor permute(const Tensor& input, const std::vector<int>& perm, Graph* g = nullptr);

// out = sum_j weights[j] * x[slice j of `axis`] + bias (scalar bias).
Tensor weighted_sum_axis(const Tensor& input, const Tensor& weights, const Tensor& bias, int axis,
                         Graph* g = nullptr);

// Mean over grouped rows of the second-to-last axis. input: [c x f] or
// [batch x c x f]; groups index into c. -> [P x f] / [batch x P x f].
Tensor group_mean(const Tensor& input, const std::vector<std::vector<int>>& groups,
                  Graph* g = nullptr);

Tensor dropout(const Tensor& input, double rate, Mode mode, Rng& rng, Graph* g = nullptr);

Tensor reduce_sum(const Tensor& input, Graph* g = nullptr);
Tensor reduce_mean(const Tensor& input, Graph* g = nullptr);

// logits: batch x classes. Returns {mean NLL as scalar tensor, probs}.
// Stabilized by row-max subtraction; only the loss participates in the tape.
std::pair<Tensor, Tensor> softmax_cross_entropy(const Tensor& logits,
                                                const std::vector<int>& labels,
                                                Graph* g = nullptr);

// Row softmax, value-only (used for reporting probabilities).
Tensor softmax_rows(const Tensor& logits);

}  // namespace ops

// Max over coordinates of |analytic - central difference| / max(1e-12,
// |analytic| + |numeric|) for a scalar-valued function evaluated at `point`.
double finite_diff_check(const std::function<double(const std::vector<double>&)>& fn,
                         const std::vector<double>& point, const std::vector<double>& analytic,
                         double eps);

}  // namespace lgg
