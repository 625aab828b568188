#include "lgg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lgg/errors.hpp"
#include "lgg/kernels.hpp"

namespace lgg {

BatchNormState BatchNormState::identity(std::int64_t features) {
  BatchNormState s;
  s.mean = Tensor({features});
  s.var = Tensor::full({features}, 1.0);
  return s;
}

namespace ops {
namespace {

bool tracked(const Tensor& t) { return t.node != kNoNode; }

void require_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw Error(std::string(what) + ": non-finite input rejected");
}

NodeId out_node(Graph* g, const std::vector<std::int64_t>& shape, bool any_tracked) {
  if (!g || !any_tracked) return kNoNode;
  return g->make_node(shape);
}

// Broadcast plan: numpy rules, trailing axes aligned, extent-1 broadcasts.
struct BcastPlan {
  std::vector<std::int64_t> out_shape;
  std::vector<std::int64_t> a_stride;  // per out axis, 0 where broadcast
  std::vector<std::int64_t> b_stride;
};

BcastPlan broadcast_plan(const Tensor& a, const Tensor& b) {
  const int ra = a.rank(), rb = b.rank();
  const int r = std::max(ra, rb);
  BcastPlan plan;
  plan.out_shape.assign(r, 1);
  for (int i = 0; i < r; ++i) {
    const std::int64_t ea = (i < r - ra) ? 1 : a.extent(i - (r - ra));
    const std::int64_t eb = (i < r - rb) ? 1 : b.extent(i - (r - rb));
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("cannot broadcast " + a.shape_str() + " with " + b.shape_str());
    }
    plan.out_shape[i] = std::max(ea, eb);
  }
  auto strides_for = [&](const Tensor& t, int rt) {
    std::vector<std::int64_t> contiguous(rt, 1);
    for (int i = rt - 2; i >= 0; --i) contiguous[i] = contiguous[i + 1] * t.extent(i + 1);
    std::vector<std::int64_t> s(r, 0);
    for (int i = 0; i < rt; ++i) {
      const int oi = i + (r - rt);
      s[oi] = (t.extent(i) == 1 && plan.out_shape[oi] != 1) ? 0 : contiguous[i];
    }
    return s;
  };
  plan.a_stride = strides_for(a, ra);
  plan.b_stride = strides_for(b, rb);
  return plan;
}

enum class BinOp { Mul, Add, Sub };

Tensor binary_bcast(const Tensor& a, const Tensor& b, BinOp op, Graph* g) {
  BcastPlan plan = broadcast_plan(a, b);
  const int r = static_cast<int>(plan.out_shape.size());
  Tensor out(plan.out_shape);
  const std::int64_t n = out.size();

  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  std::vector<std::int64_t> a_idx_of(static_cast<std::size_t>(n)), b_idx_of(static_cast<std::size_t>(n));
  for (std::int64_t f = 0; f < n; ++f) {
    std::int64_t ia = 0, ib = 0;
    for (int d = 0; d < r; ++d) {
      ia += idx[static_cast<std::size_t>(d)] * plan.a_stride[static_cast<std::size_t>(d)];
      ib += idx[static_cast<std::size_t>(d)] * plan.b_stride[static_cast<std::size_t>(d)];
    }
    a_idx_of[static_cast<std::size_t>(f)] = ia;
    b_idx_of[static_cast<std::size_t>(f)] = ib;
    const double av = a[ia], bv = b[ib];
    out[f] = op == BinOp::Mul ? av * bv : (op == BinOp::Add ? av + bv : av - bv);
    for (int d = r - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < plan.out_shape[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }

  const bool any = tracked(a) || tracked(b);
  out.node = out_node(g, out.shape(), any);
  if (out.node != kNoNode) {
    const NodeId na = a.node, nb = b.node;
    Tensor a_copy, b_copy;
    if (op == BinOp::Mul) {  // each factor's grad needs the other factor
      if (na != kNoNode) b_copy = b;
      if (nb != kNoNode) a_copy = a;
    }
    auto a_shape = a.shape();
    auto b_shape = b.shape();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      if (na != kNoNode) {
        Tensor da(a_shape);
        for (std::int64_t f = 0; f < n; ++f) {
          const std::int64_t ia = a_idx_of[static_cast<std::size_t>(f)];
          double v = up[f];
          if (op == BinOp::Mul) v *= b_copy[b_idx_of[static_cast<std::size_t>(f)]];
          da[ia] += v;
        }
        gr.add_grad(na, da);
      }
      if (nb != kNoNode) {
        Tensor db(b_shape);
        for (std::int64_t f = 0; f < n; ++f) {
          const std::int64_t ib = b_idx_of[static_cast<std::size_t>(f)];
          double v = up[f];
          if (op == BinOp::Mul) v *= a_copy[a_idx_of[static_cast<std::size_t>(f)]];
          if (op == BinOp::Sub) v = -v;
          db[ib] += v;
        }
        gr.add_grad(nb, db);
      }
    });
  }
  return out;
}

}  // namespace

Tensor conv1d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                    std::int64_t stride, Graph* g) {
  if (input.rank() != 2) throw ShapeError("conv1d_valid: input must be rows x len, got " + input.shape_str());
  if (kernels.rank() != 2) throw ShapeError("conv1d_valid: kernels must be t x kw, got " + kernels.shape_str());
  const std::int64_t rows = input.extent(0), len = input.extent(1);
  const std::int64_t t = kernels.extent(0), kw = kernels.extent(1);
  if (bias.rank() != 1 || bias.extent(0) != t) {
    throw ShapeError("conv1d_valid: bias must have extent " + std::to_string(t));
  }
  if (kw > len) {
    throw ShapeError("conv1d_valid: kernel width " + std::to_string(kw) + " exceeds input length " +
                     std::to_string(len));
  }
  if (stride < 1) throw ShapeError("conv1d_valid: stride must be >= 1");
  require_finite(input, "conv1d_valid");
  require_finite(kernels, "conv1d_valid");
  require_finite(bias, "conv1d_valid");

  const std::int64_t out_len = (len - kw) / stride + 1;
  Tensor out({t, rows, out_len});
  kernels::conv1d_forward(input.data(), rows, len, kernels.data(), bias.data(), t, kw, stride,
                          out.data(), out_len);

  const bool any = tracked(input) || tracked(kernels) || tracked(bias);
  out.node = out_node(g, out.shape(), any);
  if (out.node != kNoNode) {
    const NodeId ni = input.node, nk = kernels.node, nb = bias.node;
    Tensor x_copy = (nk != kNoNode) ? input : Tensor();
    Tensor w_copy = (ni != kNoNode) ? kernels : Tensor();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      if (ni != kNoNode) {
        Tensor dx({rows, len});
        kernels::conv1d_backward_input(up.data(), w_copy.data(), rows, len, t, kw, stride,
                                       dx.data(), out_len);
        gr.add_grad(ni, dx);
      }
      if (nk != kNoNode || nb != kNoNode) {
        Tensor dw({t, kw});
        Tensor db({t});
        kernels::conv1d_backward_weights(up.data(), x_copy.data(), rows, len, t, kw, stride,
                                         dw.data(), db.data(), out_len);
        if (nk != kNoNode) gr.add_grad(nk, dw);
        if (nb != kNoNode) gr.add_grad(nb, db);
      }
    });
  }
  return out;
}

Tensor avg_pool1d(const Tensor& input, std::int64_t window, std::int64_t stride, Graph* g) {
  if (input.rank() < 1) throw ShapeError("avg_pool1d: input must have at least one axis");
  const std::int64_t len = input.extent(input.rank() - 1);
  if (window < 1 || window > len) {
    throw ShapeError("avg_pool1d: window " + std::to_string(window) + " invalid for length " +
                     std::to_string(len));
  }
  if (stride < 1) throw ShapeError("avg_pool1d: stride must be >= 1");
  const std::int64_t rows = input.size() / len;
  const std::int64_t out_len = (len - window) / stride + 1;

  std::vector<std::int64_t> out_shape = input.shape();
  out_shape.back() = out_len;
  Tensor out(out_shape);
  kernels::avg_pool_forward(input.data(), rows, len, window, stride, out.data(), out_len);

  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    auto in_shape = input.shape();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      Tensor dx(in_shape);
      kernels::avg_pool_backward(up.data(), rows, len, window, stride, dx.data(), out_len);
      gr.add_grad(ni, dx);
    });
  }
  return out;
}

Tensor activation(const Tensor& input, Activation kind, double slope, Graph* g) {
  if (kind == Activation::Relu) slope = 0.0;
  if (slope < 0.0 || slope >= 1.0) throw ConfigError("activation: slope must be in [0, 1)");

  Tensor out(input.shape());
  const std::int64_t n = input.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = input[i];
    out[i] = x >= 0.0 ? x : slope * x;
  }

  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    Tensor x_copy = input;
    auto in_shape = input.shape();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      Tensor dx(in_shape);
      for (std::int64_t i = 0; i < n; ++i) {
        // subgradient at 0 takes the positive branch
        dx[i] = up[i] * (x_copy[i] >= 0.0 ? 1.0 : slope);
      }
      gr.add_grad(ni, dx);
    });
  }
  return out;
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode, int feature_axis, double eps, double momentum,
                  Graph* g) {
  if (feature_axis < 0 || feature_axis >= input.rank()) {
    throw ShapeError("batch_norm: feature axis out of range for " + input.shape_str());
  }
  const std::int64_t feats = input.extent(feature_axis);
  if (gamma.rank() != 1 || gamma.extent(0) != feats || beta.rank() != 1 || beta.extent(0) != feats) {
    throw ShapeError("batch_norm: gamma/beta must have extent " + std::to_string(feats));
  }
  if (state.mean.size() != feats || state.var.size() != feats) {
    throw ShapeError("batch_norm: running stats must have extent " + std::to_string(feats));
  }
  const std::int64_t n = input.size();
  const std::int64_t reduce_count = n / feats;
  if (mode == Mode::Train && reduce_count < 2) {
    throw ShapeError("batch_norm: train mode needs at least 2 samples along the statistics axes");
  }

  // Feature index of a flat element: (flat / inner) % feats.
  std::int64_t inner = 1;
  for (int a = feature_axis + 1; a < input.rank(); ++a) inner *= input.extent(a);

  std::vector<double> mu(static_cast<std::size_t>(feats), 0.0);
  std::vector<double> sigma2(static_cast<std::size_t>(feats), 0.0);
  if (mode == Mode::Train) {
    for (std::int64_t i = 0; i < n; ++i) mu[static_cast<std::size_t>((i / inner) % feats)] += input[i];
    for (auto& m : mu) m /= static_cast<double>(reduce_count);
    for (std::int64_t i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>((i / inner) % feats);
      const double d = input[i] - mu[j];
      sigma2[j] += d * d;
    }
    for (auto& v : sigma2) v /= static_cast<double>(reduce_count);
    for (std::int64_t j = 0; j < feats; ++j) {
      state.mean[j] = (1.0 - momentum) * state.mean[j] + momentum * mu[static_cast<std::size_t>(j)];
      state.var[j] = (1.0 - momentum) * state.var[j] + momentum * sigma2[static_cast<std::size_t>(j)];
    }
  } else {
    for (std::int64_t j = 0; j < feats; ++j) {
      mu[static_cast<std::size_t>(j)] = state.mean[j];
      sigma2[static_cast<std::size_t>(j)] = state.var[j];
    }
  }

  std::vector<double> inv_sd(static_cast<std::size_t>(feats));
  for (std::int64_t j = 0; j < feats; ++j) {
    inv_sd[static_cast<std::size_t>(j)] = 1.0 / std::sqrt(sigma2[static_cast<std::size_t>(j)] + eps);
  }

  Tensor xhat(input.shape());
  Tensor out(input.shape());
  for (std::int64_t i = 0; i < n; ++i) {
    const std::size_t j = static_cast<std::size_t>((i / inner) % feats);
    const double xh = (input[i] - mu[j]) * inv_sd[j];
    xhat[i] = xh;
    out[i] = gamma[static_cast<std::int64_t>(j)] * xh + beta[static_cast<std::int64_t>(j)];
  }

  const bool any = tracked(input) || tracked(gamma) || tracked(beta);
  out.node = out_node(g, out.shape(), any);
  if (out.node != kNoNode) {
    const NodeId ni = input.node, ng = gamma.node, nb = beta.node;
    Tensor gamma_copy = gamma;
    auto in_shape = input.shape();
    const bool train = mode == Mode::Train;
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      std::vector<double> sum_up(static_cast<std::size_t>(feats), 0.0);
      std::vector<double> sum_up_xhat(static_cast<std::size_t>(feats), 0.0);
      for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t j = static_cast<std::size_t>((i / inner) % feats);
        sum_up[j] += up[i];
        sum_up_xhat[j] += up[i] * xhat[i];
      }
      if (nb != kNoNode) {
        Tensor db({feats});
        for (std::int64_t j = 0; j < feats; ++j) db[j] = sum_up[static_cast<std::size_t>(j)];
        gr.add_grad(nb, db);
      }
      if (ng != kNoNode) {
        Tensor dg({feats});
        for (std::int64_t j = 0; j < feats; ++j) dg[j] = sum_up_xhat[static_cast<std::size_t>(j)];
        gr.add_grad(ng, dg);
      }
      if (ni != kNoNode) {
        Tensor dx(in_shape);
        if (train) {
          const double inv_count = 1.0 / static_cast<double>(reduce_count);
          for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t j = static_cast<std::size_t>((i / inner) % feats);
            dx[i] = gamma_copy[static_cast<std::int64_t>(j)] * inv_sd[j] *
                    (up[i] - sum_up[j] * inv_count - xhat[i] * sum_up_xhat[j] * inv_count);
          }
        } else {
          for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t j = static_cast<std::size_t>((i / inner) % feats);
            dx[i] = up[i] * gamma_copy[static_cast<std::int64_t>(j)] * inv_sd[j];
          }
        }
        gr.add_grad(ni, dx);
      }
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, Graph* g) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: operands must be rank 2, got " + a.shape_str() + " and " + b.shape_str());
  }
  const std::int64_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
  if (k != k2) throw ShapeError("matmul: inner extents differ, " + a.shape_str() + " vs " + b.shape_str());

  Tensor out({m, n});
  kernels::matmul(a.data(), b.data(), out.data(), m, k, n);

  const bool any = tracked(a) || tracked(b);
  out.node = out_node(g, out.shape(), any);
  if (out.node != kNoNode) {
    const NodeId na = a.node, nb = b.node;
    Tensor a_copy = (nb != kNoNode) ? a : Tensor();
    Tensor b_copy = (na != kNoNode) ? b : Tensor();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      if (na != kNoNode) {
        Tensor da({m, k});
        kernels::matmul_nt(up.data(), b_copy.data(), da.data(), m, n, k);  // dC * B^T
        gr.add_grad(na, da);
      }
      if (nb != kNoNode) {
        Tensor db({k, n});
        kernels::matmul_tn(a_copy.data(), up.data(), db.data(), k, m, n);  // A^T * dC
        gr.add_grad(nb, db);
      }
    });
  }
  return out;
}

Tensor left_matmul_batched(const Tensor& a, const Tensor& x, Graph* g) {
  if (a.rank() != 2 || x.rank() != 3) {
    throw ShapeError("left_matmul_batched: need a[m x p] and x[batch x p x n]");
  }
  const std::int64_t m = a.extent(0), p = a.extent(1);
  const std::int64_t batch = x.extent(0), p2 = x.extent(1), n = x.extent(2);
  if (p != p2) throw ShapeError("left_matmul_batched: inner extents differ");

  Tensor out({batch, m, n});
  for (std::int64_t bi = 0; bi < batch; ++bi) {
    kernels::matmul(a.data(), x.data() + bi * p * n, out.data() + bi * m * n, m, p, n);
  }

  const bool any = tracked(a) || tracked(x);
  out.node = out_node(g, out.shape(), any);
  if (out.node != kNoNode) {
    const NodeId na = a.node, nx = x.node;
    Tensor a_copy = (nx != kNoNode) ? a : Tensor();
    Tensor x_copy = (na != kNoNode) ? x : Tensor();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      if (na != kNoNode) {
        Tensor da({m, p});
        Tensor tmp({m, p});
        for (std::int64_t bi = 0; bi < batch; ++bi) {
          kernels::matmul_nt(up.data() + bi * m * n, x_copy.data() + bi * p * n, tmp.data(), m, n, p);
          for (std::int64_t i = 0; i < m * p; ++i) da[i] += tmp[i];
        }
        gr.add_grad(na, da);
      }
      if (nx != kNoNode) {
        Tensor dx({batch, p, n});
        for (std::int64_t bi = 0; bi < batch; ++bi) {
          kernels::matmul_tn(a_copy.data(), up.data() + bi * m * n, dx.data() + bi * p * n, p, m, n);
        }
        gr.add_grad(nx, dx);
      }
    });
  }
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b, Graph* g) { return binary_bcast(a, b, BinOp::Mul, g); }
Tensor add(const Tensor& a, const Tensor& b, Graph* g) { return binary_bcast(a, b, BinOp::Add, g); }
Tensor subtract(const Tensor& a, const Tensor& b, Graph* g) { return binary_bcast(a, b, BinOp::Sub, g); }

Tensor concat(const std::vector<Tensor>& parts, int axis, Graph* g) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int r = parts[0].rank();
  if (axis < 0 || axis >= r) throw ShapeError("concat: axis out of range");
  std::int64_t axis_total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != r) throw ShapeError("concat: rank mismatch");
    for (int a = 0; a < r; ++a) {
      if (a != axis && p.extent(a) != parts[0].extent(a)) {
        throw ShapeError("concat: extent mismatch on axis " + std::to_string(a));
      }
    }
    axis_total += p.extent(axis);
  }

  std::vector<std::int64_t> out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(axis)] = axis_total;
  Tensor out(out_shape);

  std::int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= parts[0].extent(a);
  for (int a = axis + 1; a < r; ++a) inner *= parts[0].extent(a);

  std::int64_t offset = 0;
  for (const Tensor& p : parts) {
    const std::int64_t pa = p.extent(axis);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = p.data() + o * pa * inner;
      double* dst = out.data() + (o * axis_total + offset) * inner;
      for (std::int64_t i = 0; i < pa * inner; ++i) dst[i] = src[i];
    }
    offset += pa;
  }

  bool any = false;
  for (const Tensor& p : parts) any = any || tracked(p);
  out.node = out_node(g, out.shape(), any);
  if (out.node != kNoNode) {
    std::vector<NodeId> nodes;
    std::vector<std::int64_t> axis_extents;
    for (const Tensor& p : parts) {
      nodes.push_back(p.node);
      axis_extents.push_back(p.extent(axis));
    }
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      std::int64_t off = 0;
      for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
        const std::int64_t pa = axis_extents[pi];
        if (nodes[pi] != kNoNode) {
          gr.add_grad(nodes[pi], slice_axis(up, axis, off, pa));
        }
        off += pa;
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& input, std::vector<std::int64_t> new_shape, Graph* g) {
  if (shape_product(new_shape) != input.size()) {
    throw ShapeError("reshape: cannot view " + input.shape_str() + " as " + shape_to_string(new_shape));
  }
  Tensor out(std::move(new_shape), input.storage());
  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      gr.add_grad_raw(ni, up.data(), up.size());
    });
  }
  return out;
}

namespace {
Tensor permute_values(const Tensor& input, const std::vector<int>& perm) {
  const int r = input.rank();
  std::vector<std::int64_t> in_stride(static_cast<std::size_t>(r), 1);
  for (int a = r - 2; a >= 0; --a) in_stride[static_cast<std::size_t>(a)] = in_stride[static_cast<std::size_t>(a + 1)] * input.extent(a + 1);

  std::vector<std::int64_t> out_shape(static_cast<std::size_t>(r));
  std::vector<std::int64_t> gather_stride(static_cast<std::size_t>(r));
  for (int a = 0; a < r; ++a) {
    out_shape[static_cast<std::size_t>(a)] = input.extent(perm[static_cast<std::size_t>(a)]);
    gather_stride[static_cast<std::size_t>(a)] = in_stride[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])];
  }

  Tensor out(out_shape);
  const std::int64_t n = out.size();
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  for (std::int64_t f = 0; f < n; ++f) {
    std::int64_t src = 0;
    for (int d = 0; d < r; ++d) src += idx[static_cast<std::size_t>(d)] * gather_stride[static_cast<std::size_t>(d)];
    out[f] = input[src];
    for (int d = r - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < out_shape[static_cast<std::size_t>(d)]) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  return out;
}
}  // namespace

Tensor permute(const Tensor& input, const std::vector<int>& perm, Graph* g) {
  const int r = input.rank();
  if (static_cast<int>(perm.size()) != r) throw ShapeError("permute: perm length must equal rank");
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)]) throw ShapeError("permute: invalid permutation");
    seen[static_cast<std::size_t>(p)] = true;
  }

  Tensor out = permute_values(input, perm);
  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    std::vector<int> inverse(perm.size());
    for (int a = 0; a < r; ++a) inverse[static_cast<std::size_t>(perm[static_cast<std::size_t>(a)])] = a;
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      gr.add_grad(ni, permute_values(up, inverse));
    });
  }
  return out;
}

Tensor weighted_sum_axis(const Tensor& input, const Tensor& weights, const Tensor& bias, int axis,
                         Graph* g) {
  if (axis < 0 || axis >= input.rank()) throw ShapeError("weighted_sum_axis: axis out of range");
  const std::int64_t k = input.extent(axis);
  if (weights.rank() != 1 || weights.extent(0) != k) {
    throw ShapeError("weighted_sum_axis: weights must have extent " + std::to_string(k));
  }
  if (bias.size() != 1) throw ShapeError("weighted_sum_axis: bias must be scalar");

  std::int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= input.extent(a);
  for (int a = axis + 1; a < input.rank(); ++a) inner *= input.extent(a);

  std::vector<std::int64_t> out_shape;
  for (int a = 0; a < input.rank(); ++a) {
    if (a != axis) out_shape.push_back(input.extent(a));
  }
  Tensor out(out_shape);
  const double b0 = bias.item();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      double acc = b0;
      for (std::int64_t j = 0; j < k; ++j) acc += weights[j] * input[(o * k + j) * inner + i];
      out[o * inner + i] = acc;
    }
  }

  const bool any = tracked(input) || tracked(weights) || tracked(bias);
  out.node = out_node(g, out.shape(), any);
  if (out.node != kNoNode) {
    const NodeId ni = input.node, nw = weights.node, nb = bias.node;
    Tensor in_copy = (nw != kNoNode) ? input : Tensor();
    Tensor w_copy = (ni != kNoNode) ? weights : Tensor();
    auto in_shape = input.shape();
    auto bias_shape = bias.shape();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      if (ni != kNoNode) {
        Tensor dx(in_shape);
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t j = 0; j < k; ++j) {
            for (std::int64_t i = 0; i < inner; ++i) {
              dx[(o * k + j) * inner + i] = w_copy[j] * up[o * inner + i];
            }
          }
        }
        gr.add_grad(ni, dx);
      }
      if (nw != kNoNode) {
        Tensor dw({k});
        for (std::int64_t j = 0; j < k; ++j) {
          double acc = 0.0;
          for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t i = 0; i < inner; ++i) {
              acc += in_copy[(o * k + j) * inner + i] * up[o * inner + i];
            }
          }
          dw[j] = acc;
        }
        gr.add_grad(nw, dw);
      }
      if (nb != kNoNode) {
        double acc = 0.0;
        for (std::int64_t f = 0; f < up.size(); ++f) acc += up[f];
        Tensor db(bias_shape);
        db[0] = acc;
        gr.add_grad(nb, db);
      }
    });
  }
  return out;
}

Tensor group_mean(const Tensor& input, const std::vector<std::vector<int>>& groups, Graph* g) {
  if (input.rank() != 2 && input.rank() != 3) {
    throw ShapeError("group_mean: input must be [c x f] or [batch x c x f]");
  }
  const bool batched = input.rank() == 3;
  const std::int64_t batch = batched ? input.extent(0) : 1;
  const std::int64_t c = input.extent(batched ? 1 : 0);
  const std::int64_t f = input.extent(batched ? 2 : 1);
  const std::int64_t p = static_cast<std::int64_t>(groups.size());
  if (p == 0) throw ShapeError("group_mean: no groups");
  for (const auto& grp : groups) {
    if (grp.empty()) throw ShapeError("group_mean: empty group");
    for (int ch : grp) {
      if (ch < 0 || ch >= c) {
        throw ShapeError("group_mean: channel index " + std::to_string(ch) + " out of range for " +
                         std::to_string(c) + " rows");
      }
    }
  }

  std::vector<std::int64_t> out_shape = batched ? std::vector<std::int64_t>{batch, p, f}
                                                : std::vector<std::int64_t>{p, f};
  Tensor out(out_shape);
  for (std::int64_t bi = 0; bi < batch; ++bi) {
    const double* in_b = input.data() + bi * c * f;
    double* out_b = out.data() + bi * p * f;
    for (std::int64_t pi = 0; pi < p; ++pi) {
      const auto& grp = groups[static_cast<std::size_t>(pi)];
      const double inv_q = 1.0 / static_cast<double>(grp.size());
      double* row = out_b + pi * f;
      for (std::int64_t j = 0; j < f; ++j) row[j] = 0.0;
      for (int ch : grp) {
        const double* src = in_b + static_cast<std::int64_t>(ch) * f;
        for (std::int64_t j = 0; j < f; ++j) row[j] += src[j];
      }
      for (std::int64_t j = 0; j < f; ++j) row[j] *= inv_q;
    }
  }

  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    auto in_shape = input.shape();
    auto groups_copy = groups;
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      Tensor dx(in_shape);
      for (std::int64_t bi = 0; bi < batch; ++bi) {
        double* dx_b = dx.data() + bi * c * f;
        const double* up_b = up.data() + bi * p * f;
        for (std::int64_t pi = 0; pi < p; ++pi) {
          const auto& grp = groups_copy[static_cast<std::size_t>(pi)];
          const double inv_q = 1.0 / static_cast<double>(grp.size());
          const double* urow = up_b + pi * f;
          for (int ch : grp) {
            double* drow = dx_b + static_cast<std::int64_t>(ch) * f;
            for (std::int64_t j = 0; j < f; ++j) drow[j] += urow[j] * inv_q;
          }
        }
      }
      gr.add_grad(ni, dx);
    });
  }
  return out;
}

Tensor dropout(const Tensor& input, double rate, Mode mode, Rng& rng, Graph* g) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (mode == Mode::Eval || rate == 0.0) return input;  // exact identity, same node

  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  Tensor out(input.shape());
  const std::int64_t n = input.size();
  std::vector<double> mask(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const bool drop = uni(rng) < rate;
    mask[static_cast<std::size_t>(i)] = drop ? 0.0 : scale;
    out[i] = input[i] * mask[static_cast<std::size_t>(i)];
  }

  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    auto in_shape = input.shape();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      Tensor dx(in_shape);
      for (std::int64_t i = 0; i < n; ++i) dx[i] = up[i] * mask[static_cast<std::size_t>(i)];
      gr.add_grad(ni, dx);
    });
  }
  return out;
}

Tensor reduce_sum(const Tensor& input, Graph* g) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < input.size(); ++i) acc += input[i];
  Tensor out = Tensor::scalar(acc);
  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    auto in_shape = input.shape();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      gr.add_grad(ni, Tensor::full(in_shape, up.item()));
    });
  }
  return out;
}

Tensor reduce_mean(const Tensor& input, Graph* g) {
  const double inv = 1.0 / static_cast<double>(input.size());
  double acc = 0.0;
  for (std::int64_t i = 0; i < input.size(); ++i) acc += input[i];
  Tensor out = Tensor::scalar(acc * inv);
  out.node = out_node(g, out.shape(), tracked(input));
  if (out.node != kNoNode) {
    const NodeId ni = input.node;
    auto in_shape = input.shape();
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      gr.add_grad(ni, Tensor::full(in_shape, up.item() * inv));
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: logits must be batch x classes");
  const std::int64_t b = logits.extent(0), c = logits.extent(1);
  Tensor probs({b, c});
  for (std::int64_t i = 0; i < b; ++i) {
    const double* row = logits.data() + i * c;
    double mx = row[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    for (std::int64_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - mx) / denom;
  }
  return probs;
}

std::pair<Tensor, Tensor> softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                                                Graph* g) {
  if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be batch x classes");
  const std::int64_t b = logits.extent(0), c = logits.extent(1);
  if (static_cast<std::int64_t>(labels.size()) != b) {
    throw ShapeError("softmax_cross_entropy: need one label per row");
  }
  for (int y : labels) {
    if (y < 0 || y >= c) throw DataError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
  }

  Tensor probs = softmax_rows(logits);
  double loss = 0.0;
  for (std::int64_t i = 0; i < b; ++i) {
    const double* row = logits.data() + i * c;
    double mx = row[0];
    for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    // -log p_y = log(sum exp(z - mx)) - (z_y - mx), overflow-safe
    loss += std::log(denom) - (row[labels[static_cast<std::size_t>(i)]] - mx);
  }
  loss /= static_cast<double>(b);

  Tensor out = Tensor::scalar(loss);
  out.node = out_node(g, out.shape(), tracked(logits));
  if (out.node != kNoNode) {
    const NodeId nl = logits.node;
    Tensor probs_copy = probs;
    auto labels_copy = labels;
    g->record(out.node, [=](Graph& gr, const Tensor& up) {
      const double s = up.item() / static_cast<double>(b);
      Tensor dl({b, c});
      for (std::int64_t i = 0; i < b; ++i) {
        for (std::int64_t j = 0; j < c; ++j) {
          const double onehot = (j == labels_copy[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
          dl[i * c + j] = s * (probs_copy[i * c + j] - onehot);
        }
      }
      gr.add_grad(nl, dl);
    });
  }
  return {out, probs};
}

}  // namespace ops

double finite_diff_check(const std::function<double(const std::vector<double>&)>& fn,
                         const std::vector<double>& point, const std::vector<double>& analytic,
                         double eps) {
  if (eps <= 0.0) throw ConfigError("finite_diff_check: eps must be positive");
  if (point.size() != analytic.size()) {
    throw ShapeError("finite_diff_check: point and analytic gradient differ in length");
  }
  double worst = 0.0;
  std::vector<double> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double fp = fn(probe);
    probe[i] = point[i] - eps;
    const double fm = fn(probe);
    probe[i] = point[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error("finite_diff_check: function evaluated to a non-finite value");
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace lgg
