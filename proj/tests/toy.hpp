// Shared toy-model fixtures: a 4-channel montage with two local graphs and
// the small configuration used by the gradient-integrity checks.
#pragma once

#include <random>
#include <vector>

#include "lgg/model.hpp"
#include "lgg/ops.hpp"
#include "lgg/train.hpp"

namespace toy {

inline lgg::MontageGraph montage4() {
  lgg::MontageGraph m;
  m.kind = lgg::GraphKind::Custom;
  m.channels = {"ch1", "ch2", "ch3", "ch4"};
  m.locals.push_back(lgg::LocalGraph{"left", {0, 1}});
  m.locals.push_back(lgg::LocalGraph{"right", {2, 3}});
  return m;
}

// c=4, l=64, t=2, L=2, f_S=16 -> kernel widths [8, 4]; P=2.
inline lgg::ModelConfig config4() {
  lgg::ModelConfig mc;
  mc.sample_rate = 16.0;
  mc.input_len = 64;
  mc.alpha = 0.5;
  mc.levels = 2;
  mc.t_kernels = 2;
  mc.pool_window = 16;
  mc.pool_stride = 16;
  mc.pool2_window = 2;
  mc.pool2_stride = 2;
  mc.hidden = 3;
  mc.dropout_rate = 0.0;
  return mc;
}

// Randomizes the batch-norm running statistics so the eval-mode gradcheck
// does not rely on the identity stats.
inline void scatter_bn_stats(lgg::ModelParams& params, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mean_d(-0.5, 0.5);
  std::uniform_real_distribution<double> var_d(0.5, 2.0);
  for (lgg::Tensor* t : {&params.bn1.mean, &params.bn2.mean}) {
    if (t->size() == 0) continue;
    for (std::int64_t i = 0; i < t->size(); ++i) (*t)[i] = mean_d(rng);
  }
  for (lgg::Tensor* t : {&params.bn1.var, &params.bn2.var}) {
    if (t->size() == 0) continue;
    for (std::int64_t i = 0; i < t->size(); ++i) (*t)[i] = var_d(rng);
  }
}

// Max relative error of every trainable parameter's analytic gradient
// against central finite differences, on a fixed batch. Dropout off,
// batch norm in eval mode with frozen stats.
inline double full_model_gradcheck(const lgg::ModelConfig& mc, const lgg::MontageGraph& montage,
                                   std::uint64_t seed, double eps = 1e-5) {
  using namespace lgg;
  std::mt19937_64 rng(seed);
  ModelParams params = init_params(mc, montage, seed);
  scatter_bn_stats(params, rng);

  const std::int64_t c = static_cast<std::int64_t>(montage.included_channels().size());
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Tensor batch({2, c, mc.input_len});
  for (std::int64_t i = 0; i < batch.size(); ++i) batch[i] = uni(rng);
  const std::vector<int> labels = {0, 1};

  // analytic
  Graph g;
  params.for_each_param([&](const std::string&, Tensor& p) { g.track(p); });
  Rng drop_rng(0);
  Tensor logits = forward_logits(batch, params, montage, mc, Mode::Eval, drop_rng, &g);
  auto [loss, probs] = ops::softmax_cross_entropy(logits, labels, &g);
  g.backward(loss);

  std::vector<double> point, analytic;
  params.for_each_param([&](const std::string&, Tensor& p) {
    Tensor grad = g.grad(p.node);
    for (std::int64_t i = 0; i < p.size(); ++i) {
      point.push_back(p[i]);
      analytic.push_back(grad[i]);
    }
  });
  params.for_each_param([&](const std::string&, Tensor& p) { p.node = kNoNode; });

  auto eval = [&](const std::vector<double>& flat) {
    ModelParams local = params.clone();
    std::size_t pos = 0;
    local.for_each_param([&](const std::string&, Tensor& p) {
      for (std::int64_t i = 0; i < p.size(); ++i) p[i] = flat[pos++];
    });
    Rng r(0);
    Tensor lg = forward_logits(batch, local, montage, mc, Mode::Eval, r);
    return ops::softmax_cross_entropy(lg, labels).first.item();
  };

  return finite_diff_check(eval, point, analytic, eps);
}

}  // namespace toy
