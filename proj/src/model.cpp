#include "lgg/model.hpp"

#include <cmath>
#include <sstream>

#include "lgg/errors.hpp"

namespace lgg {

namespace {

constexpr std::uint64_t kInitSalt = 0x696e6974ull;  // params init stream

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ModelConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("model: alpha must be in (0, 1)");
  if (levels < 1) throw ConfigError("model: levels must be >= 1");
  if (t_kernels < 1) throw ConfigError("model: t_kernels must be >= 1");
  if (hidden < 1) throw ConfigError("model: hidden width must be >= 1");
  if (gcn_layers < 1) throw ConfigError("model: gcn_layers must be >= 1");
  if (classes < 2) throw ConfigError("model: classes must be >= 2");
  if (sample_rate <= 0.0) throw ConfigError("model: sample_rate must be positive");
  if (input_len < 1) throw ConfigError("model: input_len must be set");
  if (std::pow(alpha, levels) * sample_rate < 1.0) {
    throw ConfigError("model: alpha^levels * sample_rate must be >= 1");
  }
  if (conv_stride < 1 || pool_window < 1 || pool_stride < 1 || pool2_window < 1 || pool2_stride < 1) {
    throw ConfigError("model: strides and pool windows must be >= 1");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("model: dropout_rate must be in [0, 1)");
  if (leaky_slope < 0.0 || leaky_slope >= 1.0) throw ConfigError("model: leaky_slope must be in [0, 1)");
  if (skip_local && skip_global) {
    throw ConfigError("model: cannot disable both local and global filtering; no spatial layer would remain");
  }
}

std::string ModelConfig::canonical_text() const {
  std::ostringstream os;
  os << "alpha=" << fmt(alpha) << "\n"
     << "bn_eps=" << fmt(bn_eps) << "\n"
     << "bn_momentum=" << fmt(bn_momentum) << "\n"
     << "classes=" << classes << "\n"
     << "conv_stride=" << conv_stride << "\n"
     << "dropout_rate=" << fmt(dropout_rate) << "\n"
     << "gcn_layers=" << gcn_layers << "\n"
     << "hidden=" << hidden << "\n"
     << "input_len=" << input_len << "\n"
     << "leaky_slope=" << fmt(leaky_slope) << "\n"
     << "levels=" << levels << "\n"
     << "pool2_stride=" << pool2_stride << "\n"
     << "pool2_window=" << pool2_window << "\n"
     << "pool_stride=" << pool_stride << "\n"
     << "pool_window=" << pool_window << "\n"
     << "sample_rate=" << fmt(sample_rate) << "\n"
     << "skip_global=" << (skip_global ? 1 : 0) << "\n"
     << "skip_local=" << (skip_local ? 1 : 0) << "\n"
     << "t_kernels=" << t_kernels << "\n";
  return os.str();
}

std::vector<std::int64_t> temporal_kernel_sizes(double sample_rate, double alpha, int levels) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("temporal_kernel_sizes: alpha must be in (0, 1)");
  if (levels < 1) throw ConfigError("temporal_kernel_sizes: levels must be >= 1");
  std::vector<std::int64_t> widths;
  double ratio = 1.0;
  for (int k = 1; k <= levels; ++k) {
    ratio *= alpha;
    const std::int64_t w = std::llround(ratio * sample_rate);
    if (w < 1) throw ConfigError("temporal_kernel_sizes: level " + std::to_string(k) + " width is below 1");
    if (!widths.empty() && w >= widths.back()) {
      throw ConfigError("temporal_kernel_sizes: widths must be strictly decreasing");
    }
    widths.push_back(w);
  }
  return widths;
}

ModelDims model_dims(const ModelConfig& config, const MontageGraph& montage) {
  config.validate();
  ModelDims d;
  d.c = static_cast<std::int64_t>(montage.included_channels().size());
  if (d.c < 1) throw ConfigError("model: montage includes no channels");
  d.widths = temporal_kernel_sizes(config.sample_rate, config.alpha, config.levels);
  for (std::int64_t w : d.widths) {
    if (w > config.input_len) {
      throw ConfigError("model: input_len " + std::to_string(config.input_len) +
                        " is shorter than kernel width " + std::to_string(w));
    }
    const std::int64_t cl = (config.input_len - w) / config.conv_stride + 1;
    if (config.pool_window > cl) {
      throw ConfigError("model: pool_window exceeds conv output length " + std::to_string(cl));
    }
    d.conv_len.push_back(cl);
    d.f_k.push_back((cl - config.pool_window) / config.pool_stride + 1);
    d.sum_f += d.f_k.back();
  }
  if (!config.skip_local) {
    if (config.pool2_window > d.sum_f) {
      throw ConfigError("model: pool2_window exceeds concatenated feature length " +
                        std::to_string(d.sum_f));
    }
    d.f_prime = (d.sum_f - config.pool2_window) / config.pool2_stride + 1;
    d.nodes = montage.num_locals();
    d.gcn_in = d.f_prime;
  } else {
    d.f_prime = 0;
    d.nodes = d.c;
    d.gcn_in = d.sum_f;
  }
  d.head_in = config.skip_global ? d.nodes * d.f_prime : d.nodes * config.hidden;
  return d;
}

void ModelParams::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t k = 0; k < kernel_w.size(); ++k) {
    fn("tkernel_w_" + std::to_string(k + 1), kernel_w[k]);
    fn("tkernel_b_" + std::to_string(k + 1), kernel_b[k]);
  }
  fn("fusion_w", fusion_w);
  fn("fusion_b", fusion_b);
  fn("bn1_gamma", bn1_gamma);
  fn("bn1_beta", bn1_beta);
  if (w_local.size() > 0) {
    fn("w_local", w_local);
    fn("b_local", b_local);
  }
  if (adj_params.size() > 0) {
    fn("adj_upper", adj_params);
    fn("bn2_gamma", bn2_gamma);
    fn("bn2_beta", bn2_beta);
    fn("w_global", w_global);
    fn("b_global", b_global);
    for (std::size_t m = 0; m < gcn_w.size(); ++m) {
      fn("gcn_w_" + std::to_string(m + 2), gcn_w[m]);
      fn("gcn_b_" + std::to_string(m + 2), gcn_b[m]);
    }
  }
  fn("head_w", head_w);
  fn("head_b", head_b);
}

void ModelParams::for_each_state(const std::function<void(const std::string&, Tensor&)>& fn) {
  for_each_param(fn);
  fn("bn1_mean", bn1.mean);
  fn("bn1_var", bn1.var);
  if (adj_params.size() > 0) {
    fn("bn2_mean", bn2.mean);
    fn("bn2_var", bn2.var);
  }
}

ModelParams ModelParams::clone() const { return *this; }

ModelParams init_params(const ModelConfig& config, const MontageGraph& montage, std::uint64_t seed) {
  const ModelDims dims = model_dims(config, montage);
  Rng rng = make_rng(seed, {kInitSalt});

  auto xavier = [&rng](std::vector<std::int64_t> shape, std::int64_t fan_in, std::int64_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-bound, bound);
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = uni(rng);
    return t;
  };

  ModelParams p;
  const std::int64_t t = config.t_kernels;
  for (int k = 0; k < config.levels; ++k) {
    const std::int64_t w = dims.widths[static_cast<std::size_t>(k)];
    p.kernel_w.push_back(xavier({t, w}, w, t));
    p.kernel_b.push_back(Tensor({t}));
  }
  p.fusion_w = xavier({t}, t, 1);
  p.fusion_b = Tensor::scalar(0.0);
  p.bn1_gamma = Tensor::full({t}, 1.0);
  p.bn1_beta = Tensor({t});
  p.bn1 = BatchNormState::identity(t);

  if (!config.skip_local) {
    p.w_local = xavier({dims.c, dims.sum_f}, dims.sum_f, dims.c);
    p.b_local = Tensor({dims.c, 1});
  }

  if (!config.skip_global) {
    const std::int64_t n = dims.nodes;
    const double bound = std::sqrt(1.0 / static_cast<double>(n));
    std::uniform_real_distribution<double> uni(-bound, bound);
    p.adj_params = Tensor({n * (n + 1) / 2});
    for (std::int64_t i = 0; i < p.adj_params.size(); ++i) p.adj_params[i] = uni(rng);
    p.bn2_gamma = Tensor::full({dims.gcn_in}, 1.0);
    p.bn2_beta = Tensor({dims.gcn_in});
    p.bn2 = BatchNormState::identity(dims.gcn_in);
    p.w_global = xavier({dims.gcn_in, config.hidden}, dims.gcn_in, config.hidden);
    p.b_global = Tensor({n, 1});
    for (int m = 1; m < config.gcn_layers; ++m) {
      p.gcn_w.push_back(xavier({config.hidden, config.hidden}, config.hidden, config.hidden));
      p.gcn_b.push_back(Tensor({n, 1}));
    }
  }

  p.head_w = xavier({config.classes, dims.head_in}, dims.head_in, config.classes);
  p.head_b = Tensor({config.classes});
  return p;
}

Tensor symmetric_adjacency(const Tensor& upper_params, std::int64_t n, Graph* g) {
  if (n < 1) throw ShapeError("symmetric_adjacency: n must be >= 1");
  const std::int64_t expect = n * (n + 1) / 2;
  if (upper_params.rank() != 1 || upper_params.extent(0) != expect) {
    throw ShapeError("symmetric_adjacency: expected " + std::to_string(expect) +
                     " parameters for n = " + std::to_string(n));
  }

  Tensor a({n, n});
  std::int64_t k = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i; j < n; ++j) {
      const double v = upper_params[k++];
      a[i * n + j] = v;
      a[j * n + i] = v;  // same stored value on both sides: exact symmetry
    }
  }

  if (g && upper_params.node != kNoNode) {
    a.node = g->make_node(a.shape());
    const NodeId np = upper_params.node;
    g->record(a.node, [=](Graph& gr, const Tensor& up) {
      Tensor dp({expect});
      std::int64_t k2 = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = i; j < n; ++j) {
          dp[k2] = up[i * n + j];
          if (i != j) dp[k2] += up[j * n + i];
          ++k2;
        }
      }
      gr.add_grad(np, dp);
    });
  }
  return a;
}

namespace {

// Returns {batch, rows_view}; rank-2 inputs are batch 1.
std::pair<std::int64_t, Tensor> as_rows(const Tensor& x, const ModelDims& dims,
                                        const ModelConfig& config, Graph* g) {
  if (x.rank() == 2) {
    if (x.extent(0) != dims.c || x.extent(1) != config.input_len) {
      throw ShapeError("model: expected input [" + std::to_string(dims.c) + " x " +
                       std::to_string(config.input_len) + "], got " + x.shape_str());
    }
    return {1, x};
  }
  if (x.rank() == 3) {
    if (x.extent(1) != dims.c || x.extent(2) != config.input_len) {
      throw ShapeError("model: expected input [batch x " + std::to_string(dims.c) + " x " +
                       std::to_string(config.input_len) + "], got " + x.shape_str());
    }
    return {x.extent(0), ops::reshape(x, {x.extent(0) * dims.c, config.input_len}, g)};
  }
  throw ShapeError("model: input must be [c x l] or [batch x c x l], got " + x.shape_str());
}

}  // namespace

Tensor temporal_conv_forward(const Tensor& x, int level, ModelParams& params,
                             const ModelConfig& config, Graph* g) {
  if (level < 1 || level > config.levels) throw ConfigError("temporal_conv_forward: level out of range");
  Tensor rows = x;
  if (x.rank() == 3) {
    rows = ops::reshape(x, {x.extent(0) * x.extent(1), x.extent(2)}, g);
  } else if (x.rank() != 2) {
    throw ShapeError("temporal_conv_forward: input must be [c x l] or [batch x c x l]");
  }
  const auto& w = params.kernel_w[static_cast<std::size_t>(level - 1)];
  const auto& b = params.kernel_b[static_cast<std::size_t>(level - 1)];
  Tensor conv = ops::conv1d_valid(rows, w, b, config.conv_stride, g);
  Tensor act = ops::activation(conv, Activation::LeakyRelu, config.leaky_slope, g);
  return ops::avg_pool1d(act, config.pool_window, config.pool_stride, g);
}

Tensor multi_scale_concat(const std::vector<Tensor>& levels, ModelParams& params,
                          const ModelConfig& config, Mode mode, Graph* g) {
  if (levels.empty()) throw ShapeError("multi_scale_concat: no input levels");
  for (const Tensor& z : levels) {
    if (z.rank() != 3 || z.extent(0) != levels[0].extent(0) || z.extent(1) != levels[0].extent(1)) {
      throw ShapeError("multi_scale_concat: levels must share the kernel and row extents");
    }
  }
  Tensor cat = levels.size() == 1 ? levels[0] : ops::concat(levels, 2, g);
  return ops::batch_norm(cat, params.bn1_gamma, params.bn1_beta, params.bn1, mode, 0,
                         config.bn_eps, config.bn_momentum, g);
}

Tensor kernel_fusion(const Tensor& multi_scale, ModelParams& params, Graph* g) {
  if (multi_scale.rank() != 3) throw ShapeError("kernel_fusion: input must be [t x rows x f]");
  if (multi_scale.extent(0) != params.fusion_w.extent(0)) {
    throw ShapeError("kernel_fusion: fusion weights do not match the kernel extent");
  }
  return ops::weighted_sum_axis(multi_scale, params.fusion_w, params.fusion_b, 0, g);
}

Tensor local_filter(const Tensor& fused, ModelParams& params, const ModelConfig& config, Graph* g) {
  if (params.w_local.size() == 0) throw ConfigError("local_filter: model built without local filtering");
  if (fused.rank() != 2 && fused.rank() != 3) {
    throw ShapeError("local_filter: input must be [c x f] or [batch x c x f]");
  }
  Tensor weighted = ops::hadamard(params.w_local, fused, g);
  Tensor shifted = ops::subtract(weighted, params.b_local, g);
  Tensor act = ops::activation(shifted, Activation::Relu, 0.0, g);
  return ops::avg_pool1d(act, config.pool2_window, config.pool2_stride, g);
}

Tensor local_aggregate(const Tensor& filtered, const MontageGraph& montage, Graph* g) {
  const auto groups = montage.model_groups();
  const std::int64_t c = static_cast<std::int64_t>(montage.included_channels().size());
  const std::int64_t rows = filtered.rank() == 3 ? filtered.extent(1) : filtered.extent(0);
  if (rows != c) {
    throw ShapeError("local_aggregate: input rows " + std::to_string(rows) +
                     " do not match the montage's " + std::to_string(c) + " included channels");
  }
  return ops::group_mean(filtered, groups, g);
}

Tensor gcn_layer(const Tensor& z, const Tensor& adjacency, const Tensor& w, const Tensor& b,
                 Graph* g) {
  if (z.rank() != 2) throw ShapeError("gcn_layer: z must be [nodes x features]");
  Tensor az = ops::matmul(adjacency, z, g);
  Tensor azw = ops::matmul(az, w, g);
  Tensor shifted = ops::subtract(azw, b, g);
  return ops::activation(shifted, Activation::Relu, 0.0, g);
}

Tensor global_filter(const Tensor& z_local, ModelParams& params, const ModelConfig& config,
                     Mode mode, Graph* g) {
  if (params.adj_params.size() == 0) throw ConfigError("global_filter: model built without global filtering");
  const bool batched = z_local.rank() == 3;
  if (!batched && z_local.rank() != 2) {
    throw ShapeError("global_filter: input must be [nodes x f] or [batch x nodes x f]");
  }
  const std::int64_t nodes = batched ? z_local.extent(1) : z_local.extent(0);
  const std::int64_t f = batched ? z_local.extent(2) : z_local.extent(1);
  const std::int64_t batch = batched ? z_local.extent(0) : 1;

  Tensor normed = ops::batch_norm(z_local, params.bn2_gamma, params.bn2_beta, params.bn2, mode,
                                  batched ? 2 : 1, config.bn_eps, config.bn_momentum, g);
  Tensor flat = batched ? ops::reshape(normed, {batch * nodes, f}, g) : normed;
  Tensor zw = ops::matmul(flat, params.w_global, g);
  const std::int64_t h = params.w_global.extent(1);
  Tensor zw_shaped = batched ? ops::reshape(zw, {batch, nodes, h}, g) : zw;
  // Eq.-faithful order: bias inside the adjacency product.
  Tensor shifted = ops::subtract(zw_shaped, params.b_global, g);
  Tensor a = symmetric_adjacency(params.adj_params, nodes, g);
  Tensor mixed = batched ? ops::left_matmul_batched(a, shifted, g) : ops::matmul(a, shifted, g);
  return ops::activation(mixed, Activation::Relu, 0.0, g);
}

Tensor classify_logits(const Tensor& z_global, ModelParams& params, const ModelConfig& config,
                       Mode mode, Rng& rng, Graph* g) {
  const bool batched = z_global.rank() == 3;
  if (!batched && z_global.rank() != 2) {
    throw ShapeError("classify_logits: input must be rank 2 or 3");
  }
  const std::int64_t batch = batched ? z_global.extent(0) : 1;
  const std::int64_t width = z_global.size() / batch;
  if (width != params.head_w.extent(1)) {
    throw ShapeError("classify_logits: flattened width " + std::to_string(width) +
                     " does not match head input " + std::to_string(params.head_w.extent(1)));
  }
  Tensor flat = ops::reshape(z_global, {batch, width}, g);
  Tensor dropped = ops::dropout(flat, config.dropout_rate, mode, rng, g);
  Tensor wt = ops::permute(params.head_w, {1, 0}, g);
  Tensor logits = ops::matmul(dropped, wt, g);
  return ops::add(logits, params.head_b, g);
}

Tensor forward_logits(const Tensor& x, ModelParams& params, const MontageGraph& montage,
                      const ModelConfig& config, Mode mode, Rng& rng, Graph* g) {
  const ModelDims dims = model_dims(config, montage);
  auto [batch, rows] = as_rows(x, dims, config, g);

  std::vector<Tensor> levels;
  for (int k = 1; k <= config.levels; ++k) {
    levels.push_back(temporal_conv_forward(rows, k, params, config, g));
  }
  Tensor multi = multi_scale_concat(levels, params, config, mode, g);
  Tensor fused_rows = kernel_fusion(multi, params, g);  // [(batch*c) x sum_f]
  Tensor fused = ops::reshape(fused_rows, {batch, dims.c, dims.sum_f}, g);

  Tensor z_nodes;
  if (config.skip_local) {
    z_nodes = fused;  // every channel is a graph node
  } else {
    Tensor filtered = local_filter(fused, params, config, g);
    z_nodes = local_aggregate(filtered, montage, g);
  }

  Tensor z_repr;
  if (config.skip_global) {
    z_repr = z_nodes;
  } else {
    z_repr = global_filter(z_nodes, params, config, mode, g);
    for (std::size_t m = 0; m < params.gcn_w.size(); ++m) {
      // Extra layers follow the generic form: relu(A z W - b).
      Tensor a = symmetric_adjacency(params.adj_params, dims.nodes, g);
      Tensor az = ops::left_matmul_batched(a, z_repr, g);
      Tensor flat = ops::reshape(az, {batch * dims.nodes, config.hidden}, g);
      Tensor azw = ops::matmul(flat, params.gcn_w[m], g);
      Tensor shaped = ops::reshape(azw, {batch, dims.nodes, config.hidden}, g);
      Tensor shifted = ops::subtract(shaped, params.gcn_b[m], g);
      z_repr = ops::activation(shifted, Activation::Relu, 0.0, g);
    }
  }

  return classify_logits(z_repr, params, config, mode, rng, g);  // [batch x classes]
}

Tensor forward(const Tensor& x, ModelParams& params, const MontageGraph& montage,
               const ModelConfig& config, Mode mode, Rng& rng, Graph* g) {
  Tensor logits = forward_logits(x, params, montage, config, mode, rng, g);
  Tensor probs = ops::softmax_rows(logits);
  if (x.rank() == 2) {
    return Tensor({probs.extent(1)}, probs.storage());
  }
  return probs;
}

}  // namespace lgg
