#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lgg/graph.hpp"
#include "lgg/montage.hpp"
#include "lgg/ops.hpp"
#include "lgg/rng.hpp"
#include "lgg/tensor.hpp"

namespace lgg {

struct ModelConfig {
  double sample_rate = 128.0;  // f_S of the (preprocessed) input
  std::int64_t input_len = 0;  // samples per trial; fixes the feature widths
  double alpha = 0.5;          // kernel-size ratio per level
  int levels = 3;              // L
  int t_kernels = 5;           // kernels per level
  std::int64_t conv_stride = 1;
  std::int64_t pool_window = 16, pool_stride = 16;    // after the temporal conv
  std::int64_t pool2_window = 16, pool2_stride = 16;  // after local filtering
  std::int64_t hidden = 32;    // GCN output width h
  int gcn_layers = 1;
  double dropout_rate = 0.5;
  double leaky_slope = 0.01;
  int classes = 2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  bool skip_local = false;   // ablation: channels become graph nodes
  bool skip_global = false;  // ablation: head reads the local embeddings

  void validate() const;
  // Canonical key=value form; order fixed, used for digests and run configs.
  std::string canonical_text() const;
};

// Kernel widths round(alpha^k * f_s) for k = 1..levels; strictly decreasing.
std::vector<std::int64_t> temporal_kernel_sizes(double sample_rate, double alpha, int levels);

// Everything derived from config + montage that fixes parameter shapes.
struct ModelDims {
  std::int64_t c = 0;                  // included channels
  std::vector<std::int64_t> widths;    // T-kernel widths
  std::vector<std::int64_t> conv_len;  // per-level conv output lengths
  std::vector<std::int64_t> f_k;       // per-level pooled feature lengths
  std::int64_t sum_f = 0;
  std::int64_t f_prime = 0;   // feature length after local filtering+pool
  std::int64_t nodes = 0;     // graph nodes seen by the GCN (P, or c w/o local)
  std::int64_t gcn_in = 0;    // feature width entering the GCN
  std::int64_t head_in = 0;   // flattened width entering the classifier
};
ModelDims model_dims(const ModelConfig& config, const MontageGraph& montage);

struct ModelParams {
  std::vector<Tensor> kernel_w;  // per level: t x width_k
  std::vector<Tensor> kernel_b;  // per level: [t]
  Tensor fusion_w;               // [t]
  Tensor fusion_b;               // scalar
  Tensor bn1_gamma, bn1_beta;    // per kernel-depth slice
  BatchNormState bn1;
  Tensor w_local, b_local;       // c x sum_f, c x 1
  Tensor adj_params;             // upper triangle incl. diagonal, n(n+1)/2
  Tensor bn2_gamma, bn2_beta;    // per GCN input feature
  BatchNormState bn2;
  Tensor w_global, b_global;     // gcn_in x h, nodes x 1
  std::vector<Tensor> gcn_w;     // extra GCN layers beyond the first: h x h
  std::vector<Tensor> gcn_b;     // extra GCN layers: nodes x 1
  Tensor head_w, head_b;         // classes x head_in, [classes]

  // Trainable tensors, fixed order.
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
  // Trainables plus batch-norm running stats (checkpoint payload).
  void for_each_state(const std::function<void(const std::string&, Tensor&)>& fn);

  ModelParams clone() const;
};

ModelParams init_params(const ModelConfig& config, const MontageGraph& montage, std::uint64_t seed);

// Mirrors the stored upper triangle into a full symmetric n x n matrix.
Tensor symmetric_adjacency(const Tensor& upper_params, std::int64_t n, Graph* g = nullptr);

// --- forward stages (Algorithm 1 order); X is [c x l] or [batch x c x l] ---

// One temporal level: shared conv kernels per channel, leaky relu, avg pool.
Tensor temporal_conv_forward(const Tensor& x, int level, ModelParams& params,
                             const ModelConfig& config, Graph* g = nullptr);

// Feature-axis concatenation of all levels followed by batch norm.
Tensor multi_scale_concat(const std::vector<Tensor>& levels, ModelParams& params,
                          const ModelConfig& config, Mode mode, Graph* g = nullptr);

// 1x1 attention fusion across the kernel maps; squeezes the depth axis.
Tensor kernel_fusion(const Tensor& multi_scale, ModelParams& params, Graph* g = nullptr);

// Hadamard filter, bias subtraction, relu, feature-axis pooling.
Tensor local_filter(const Tensor& fused, ModelParams& params, const ModelConfig& config,
                    Graph* g = nullptr);

// Mean aggregation of member channels per local graph.
Tensor local_aggregate(const Tensor& filtered, const MontageGraph& montage, Graph* g = nullptr);

// relu(A * z * w - b) with an explicit adjacency (generic GCN layer).
Tensor gcn_layer(const Tensor& z, const Tensor& adjacency, const Tensor& w, const Tensor& b,
                 Graph* g = nullptr);

// Batch norm, then relu(A_global * (bn(z) * W_global - b_global)).
Tensor global_filter(const Tensor& z_local, ModelParams& params, const ModelConfig& config,
                     Mode mode, Graph* g = nullptr);

// Flatten, dropout, affine map to logits.
Tensor classify_logits(const Tensor& z_global, ModelParams& params, const ModelConfig& config,
                       Mode mode, Rng& rng, Graph* g = nullptr);

// Logits for a batch; composes all stages with the configured ablations.
Tensor forward_logits(const Tensor& x, ModelParams& params, const MontageGraph& montage,
                      const ModelConfig& config, Mode mode, Rng& rng, Graph* g = nullptr);

// Softmax probabilities; for a single trial [c x l] returns [classes].
Tensor forward(const Tensor& x, ModelParams& params, const MontageGraph& montage,
               const ModelConfig& config, Mode mode, Rng& rng, Graph* g = nullptr);

}  // namespace lgg
