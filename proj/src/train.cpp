#include "lgg/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "lgg/errors.hpp"
#include "lgg/kernels.hpp"
#include "lgg/ops.hpp"

namespace lgg {

namespace {

constexpr std::uint64_t kSaltKfold = 0x6b666f6cull;
constexpr std::uint64_t kSaltBalance = 0x62616c61ull;
constexpr std::uint64_t kSaltStage2 = 0x73326261ull;
constexpr std::uint64_t kSaltFoldInit = 0x666e6974ull;
constexpr std::uint64_t kSaltShuffle = 0x73687566ull;
constexpr std::uint64_t kSaltDropout = 0x64726f70ull;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (base_lr <= 0.0 || stage2_lr <= 0.0) throw ConfigError("train: learning rates must be positive");
  if (stage2_lr >= base_lr) throw ConfigError("train: stage2_lr must be smaller than base_lr");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0, 1)");
  if (lr_step < 1) throw ConfigError("train: lr_step must be >= 1");
  if (lr_gamma <= 0.0 || lr_gamma > 1.0) throw ConfigError("train: lr_gamma must be in (0, 1]");
  if (stage1_epochs < 0 || stage2_epochs < 0) throw ConfigError("train: epoch caps must be >= 0");
  if (inner_folds < 2) throw ConfigError("train: inner_folds must be >= 2");
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2 (batch norm)");
  if (jobs < 1) throw ConfigError("train: jobs must be >= 1");
}

std::string TrainConfig::canonical_text() const {
  std::ostringstream os;
  os << "base_lr=" << fmt(base_lr) << "\n"
     << "batch_size=" << batch_size << "\n"
     << "inner_folds=" << inner_folds << "\n"
     << "jobs=" << jobs << "\n"
     << "lr_gamma=" << fmt(lr_gamma) << "\n"
     << "lr_step=" << lr_step << "\n"
     << "momentum=" << fmt(momentum) << "\n"
     << "seed=" << seed << "\n"
     << "stage1_epochs=" << stage1_epochs << "\n"
     << "stage2_epochs=" << stage2_epochs << "\n"
     << "stage2_lr=" << fmt(stage2_lr) << "\n";
  return os.str();
}

std::vector<LabeledTrial> prepare_trials(const std::vector<TrialSample>& trials,
                                         const MontageGraph& montage, const std::string& dimension,
                                         double threshold) {
  const std::vector<int> included = montage.included_channels();
  std::vector<LabeledTrial> out;
  for (const TrialSample& t : trials) {
    t.validate();
    if (static_cast<std::int64_t>(montage.channels.size()) != t.signal.extent(0)) {
      throw DataError("trial " + std::to_string(t.trial_id) + " has " +
                      std::to_string(t.signal.extent(0)) + " channels, montage expects " +
                      std::to_string(montage.channels.size()));
    }
    auto it = t.ratings.find(dimension);
    if (it == t.ratings.end()) {
      throw DataError("trial " + std::to_string(t.trial_id) + " has no rating for dimension '" +
                      dimension + "'");
    }
    LabeledTrial lt;
    lt.trial_id = t.trial_id;
    lt.label = static_cast<int>(binarize_label(it->second, threshold));
    const std::int64_t len = t.signal.extent(1);
    Tensor sig({static_cast<std::int64_t>(included.size()), len});
    for (std::size_t r = 0; r < included.size(); ++r) {
      const double* src = t.signal.data() + static_cast<std::int64_t>(included[r]) * len;
      double* dst = sig.data() + static_cast<std::int64_t>(r) * len;
      for (std::int64_t i = 0; i < len; ++i) dst[i] = src[i];
    }
    lt.signal = std::move(sig);
    out.push_back(std::move(lt));
  }
  return out;
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum) {
  if (!param.same_shape(grad) || !param.same_shape(velocity)) {
    throw ShapeError("sgd_step: param/grad/velocity shapes must match");
  }
  if (lr <= 0.0) throw ConfigError("sgd_step: lr must be positive");
  for (std::int64_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

void sgd_step_model(ModelParams& params, Graph& graph, SgdState& state, double lr, double momentum) {
  std::size_t idx = 0;
  params.for_each_param([&](const std::string& name, Tensor& p) {
    if (state.velocity.size() <= idx) state.velocity.push_back(Tensor::zeros_like(p));
    if (p.node == kNoNode) throw ProtocolError("sgd: parameter '" + name + "' was not tracked");
    Tensor g = graph.grad(p.node);
    if (!g.all_finite()) {
      throw ProtocolError("sgd: non-finite gradient for parameter '" + name + "'");
    }
    sgd_step(p, g, state.velocity[idx], lr, momentum);
    ++idx;
  });
}

double lr_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0) throw ConfigError("lr_schedule: epoch must be >= 0");
  return config.base_lr * std::pow(config.lr_gamma, epoch / config.lr_step);
}

std::vector<std::pair<int, std::vector<int>>> leave_one_trial_out(int n_trials) {
  if (n_trials < 2) throw ProtocolError("leave_one_trial_out: need at least 2 trials");
  std::vector<std::pair<int, std::vector<int>>> splits;
  for (int test = 0; test < n_trials; ++test) {
    std::vector<int> train;
    for (int i = 0; i < n_trials; ++i) {
      if (i != test) train.push_back(i);
    }
    splits.emplace_back(test, std::move(train));
  }
  return splits;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    const std::vector<int>& indices, int k, Rng& rng) {
  const int n = static_cast<int>(indices.size());
  if (k < 2) throw ProtocolError("kfold_split: k must be >= 2");
  if (n < k) throw ProtocolError("kfold_split: fewer indices than folds");

  std::vector<int> shuffled = indices;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  std::vector<std::pair<std::vector<int>, std::vector<int>>> folds;
  int start = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    std::vector<int> val(shuffled.begin() + start, shuffled.begin() + start + size);
    std::vector<int> train;
    train.insert(train.end(), shuffled.begin(), shuffled.begin() + start);
    train.insert(train.end(), shuffled.begin() + start + size, shuffled.end());
    folds.emplace_back(std::move(train), std::move(val));
    start += size;
  }
  return folds;
}

std::vector<int> balance_classes(const std::vector<int>& indices, const std::vector<int>& labels,
                                 Rng& rng) {
  std::vector<int> per_class[2];
  for (int idx : indices) {
    const int y = labels.at(static_cast<std::size_t>(idx));
    if (y != 0 && y != 1) throw ProtocolError("balance_classes: labels must be 0 or 1");
    per_class[y].push_back(idx);
  }
  if (per_class[0].empty() || per_class[1].empty()) {
    throw ProtocolError("balance_classes: a class has no samples");
  }

  std::vector<int> out = indices;
  const int minority = per_class[0].size() < per_class[1].size() ? 0 : 1;
  const std::size_t deficit =
      per_class[1 - minority].size() - per_class[minority].size();
  if (deficit > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, per_class[minority].size() - 1);
    for (std::size_t i = 0; i < deficit; ++i) out.push_back(per_class[minority][pick(rng)]);
  }
  return out;
}

std::vector<OuterPlan> make_cv_plan(const std::vector<int>& labels, const TrainConfig& config) {
  config.validate();
  const int n = static_cast<int>(labels.size());
  if (n < config.inner_folds + 1) {
    throw ProtocolError("nested cv: need at least inner_folds + 1 trials, got " + std::to_string(n));
  }

  std::vector<OuterPlan> plans;
  for (auto& [test, train] : leave_one_trial_out(n)) {
    OuterPlan plan;
    plan.test = test;
    plan.train = train;

    Rng kfold_rng = make_rng(config.seed, {kSaltKfold, static_cast<std::uint64_t>(test)});
    auto folds = kfold_split(train, config.inner_folds, kfold_rng);
    for (std::size_t j = 0; j < folds.size(); ++j) {
      InnerPlan inner;
      inner.train = folds[j].first;
      inner.val = folds[j].second;
      Rng bal_rng = make_rng(config.seed,
                             {kSaltBalance, static_cast<std::uint64_t>(test), static_cast<std::uint64_t>(j)});
      inner.train_balanced = balance_classes(inner.train, labels, bal_rng);
      plan.inner.push_back(std::move(inner));
    }

    Rng s2_rng = make_rng(config.seed, {kSaltStage2, static_cast<std::uint64_t>(test)});
    plan.stage2_train_balanced = balance_classes(plan.train, labels, s2_rng);
    plans.push_back(std::move(plan));
  }
  return plans;
}

namespace {

// Stacks the chosen trials into a [batch x c x l] tensor.
Tensor stack_batch(const std::vector<LabeledTrial>& trials, const std::vector<int>& indices,
                   std::size_t begin, std::size_t end, std::vector<int>& labels_out) {
  const std::int64_t b = static_cast<std::int64_t>(end - begin);
  const Tensor& first = trials[static_cast<std::size_t>(indices[begin])].signal;
  const std::int64_t c = first.extent(0), l = first.extent(1);
  Tensor batch({b, c, l});
  labels_out.clear();
  for (std::size_t i = begin; i < end; ++i) {
    const LabeledTrial& t = trials[static_cast<std::size_t>(indices[i])];
    const std::int64_t off = static_cast<std::int64_t>(i - begin) * c * l;
    for (std::int64_t k = 0; k < c * l; ++k) batch[off + k] = t.signal[k];
    labels_out.push_back(t.label);
  }
  return batch;
}

struct EpochRunner {
  const std::vector<LabeledTrial>& trials;
  const TrainConfig& tc;
  const ModelConfig& mc;
  const MontageGraph& montage;

  // Runs one epoch of minibatch SGD; returns false on non-finite loss.
  bool run(ModelParams& params, SgdState& velocity, std::vector<int> order, double lr, Rng& shuffle_rng,
           Rng& dropout_rng) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::size_t n = order.size();
    std::size_t begin = 0;
    while (begin < n) {
      std::size_t end = std::min(begin + static_cast<std::size_t>(tc.batch_size), n);
      if (end - begin < 2) break;  // batch norm needs >= 2; trailing singleton is dropped
      std::vector<int> labels;
      Tensor batch = stack_batch(trials, order, begin, end, labels);

      Graph g;
      params.for_each_param([&](const std::string&, Tensor& p) { g.track(p); });
      Tensor logits = forward_logits(batch, params, montage, mc, Mode::Train, dropout_rng, &g);
      auto [loss, probs] = ops::softmax_cross_entropy(logits, labels, &g);
      if (!std::isfinite(loss.item())) return false;
      g.backward(loss);
      sgd_step_model(params, g, velocity, lr, tc.momentum);
      params.for_each_param([&](const std::string&, Tensor& p) { p.node = kNoNode; });

      begin = end;
    }
    return true;
  }
};

}  // namespace

double evaluate(ModelParams& params, const std::vector<LabeledTrial>& trials,
                const std::vector<int>& indices, const MontageGraph& montage,
                const ModelConfig& mc) {
  if (indices.empty()) throw ProtocolError("evaluate: empty trial set");
  Rng rng(0);  // eval path never draws
  int hits = 0;
  for (int idx : indices) {
    const LabeledTrial& t = trials.at(static_cast<std::size_t>(idx));
    Tensor probs = forward(t.signal, params, montage, mc, Mode::Eval, rng);
    int argmax = 0;
    for (std::int64_t j = 1; j < probs.size(); ++j) {
      if (probs[j] > probs[argmax]) argmax = static_cast<int>(j);
    }
    if (argmax == t.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

double evaluate(ModelParams& params, const std::vector<LabeledTrial>& trials,
                const MontageGraph& montage, const ModelConfig& mc) {
  std::vector<int> all(trials.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return evaluate(params, trials, all, montage, mc);
}

StageOneResult train_stage1(const std::vector<LabeledTrial>& trials, const OuterPlan& plan,
                            const TrainConfig& tc, const ModelConfig& mc,
                            const MontageGraph& montage, int outer_index) {
  StageOneResult result;
  bool have_best = false;

  for (std::size_t j = 0; j < plan.inner.size(); ++j) {
    const InnerPlan& inner = plan.inner[j];
    const std::uint64_t fold_seed = derive_seed(
        tc.seed, {kSaltFoldInit, static_cast<std::uint64_t>(outer_index), static_cast<std::uint64_t>(j)});
    ModelParams params = init_params(mc, montage, fold_seed);
    SgdState velocity;
    Rng dropout_rng = make_rng(tc.seed, {kSaltDropout, static_cast<std::uint64_t>(outer_index),
                                         static_cast<std::uint64_t>(j)});

    ModelParams best_params = params.clone();
    double best_val = -1.0;
    bool diverged = false;

    EpochRunner runner{trials, tc, mc, montage};
    for (int epoch = 0; epoch < tc.stage1_epochs; ++epoch) {
      Rng shuffle_rng = make_rng(tc.seed, {kSaltShuffle, static_cast<std::uint64_t>(outer_index),
                                           static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(epoch)});
      if (!runner.run(params, velocity, inner.train_balanced, lr_schedule(epoch, tc), shuffle_rng,
                      dropout_rng)) {
        diverged = true;
        break;
      }
      const double val_acc = evaluate(params, trials, inner.val, montage, mc);
      if (val_acc > best_val) {
        best_val = val_acc;
        best_params = params.clone();
      }
    }

    result.fold_val_accuracy.push_back(diverged ? -1.0 : best_val);
    result.fold_diverged.push_back(diverged);
    if (!diverged && (!have_best || best_val > result.best_val_accuracy)) {
      result.best_val_accuracy = best_val;
      result.best_fold = static_cast<int>(j);
      result.params = std::move(best_params);
      have_best = true;
    } else if (!have_best && j == 0) {
      result.params = std::move(best_params);  // fallback if everything diverges
    }
  }

  if (!have_best) {
    bool all_diverged = true;
    for (bool d : result.fold_diverged) all_diverged = all_diverged && d;
    if (all_diverged && !result.fold_diverged.empty()) {
      throw ProtocolError("stage 1: every inner fold diverged (outer fold " +
                          std::to_string(outer_index) + ")");
    }
  }
  return result;
}

StageTwoResult train_stage2(const ModelParams& candidate, const std::vector<LabeledTrial>& trials,
                            const OuterPlan& plan, const TrainConfig& tc, const ModelConfig& mc,
                            const MontageGraph& montage, int outer_index) {
  StageTwoResult result;
  result.params = candidate.clone();
  if (tc.stage2_epochs == 0) return result;

  ModelParams params = candidate.clone();
  SgdState velocity;
  Rng dropout_rng = make_rng(tc.seed, {kSaltDropout, kSaltStage2, static_cast<std::uint64_t>(outer_index)});

  EpochRunner runner{trials, tc, mc, montage};
  for (int epoch = 0; epoch < tc.stage2_epochs; ++epoch) {
    Rng shuffle_rng = make_rng(tc.seed, {kSaltShuffle, kSaltStage2,
                                         static_cast<std::uint64_t>(outer_index),
                                         static_cast<std::uint64_t>(epoch)});
    if (!runner.run(params, velocity, plan.stage2_train_balanced, tc.stage2_lr, shuffle_rng,
                    dropout_rng)) {
      result.diverged = true;  // keep the stage-1 candidate
      return result;
    }
  }
  result.params = std::move(params);
  return result;
}

NestedCVResult run_nested_cv(const std::vector<TrialSample>& trials, const std::string& dimension,
                             const TrainConfig& tc, const ModelConfig& mc,
                             const MontageGraph& montage) {
  tc.validate();
  mc.validate();
  if (trials.empty()) throw DataError("nested cv: no trials");

  const auto issues = validate(montage, trials[0].channel_names);
  if (!issues.empty()) {
    throw DataError("nested cv: montage does not fit the data: " + issues[0].message);
  }
  for (const TrialSample& t : trials) {
    if (t.signal.extent(1) != mc.input_len) {
      throw DataError("nested cv: trial " + std::to_string(t.trial_id) + " has length " +
                      std::to_string(t.signal.extent(1)) + ", model expects " +
                      std::to_string(mc.input_len));
    }
  }

  std::vector<LabeledTrial> prepared = prepare_trials(trials, montage, dimension);
  std::vector<int> labels;
  for (const LabeledTrial& t : prepared) labels.push_back(t.label);

  NestedCVResult result;
  result.report.dimension = dimension;
  result.report.seed = tc.seed;
  result.report.config_snapshot = mc.canonical_text() + tc.canonical_text();

  const bool has_low = std::count(labels.begin(), labels.end(), 0) > 0;
  const bool has_high = std::count(labels.begin(), labels.end(), 1) > 0;
  if (!has_low || !has_high) {
    result.report.notes.push_back("skipped: dimension '" + dimension +
                                  "' has a single class after binarization");
    return result;
  }

  const std::vector<OuterPlan> plans = make_cv_plan(labels, tc);
  const int n = static_cast<int>(plans.size());

  struct FoldOutcome {
    double accuracy = 0.0;
    int best_inner = 0;
    double best_val = -1.0;
    bool stage2_warn = false;
    ModelParams params;
  };
  std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(n));

  auto run_fold = [&](int i) {
    const OuterPlan& plan = plans[static_cast<std::size_t>(i)];
    StageOneResult s1 = train_stage1(prepared, plan, tc, mc, montage, i);
    StageTwoResult s2 = train_stage2(s1.params, prepared, plan, tc, mc, montage, i);
    FoldOutcome& out = outcomes[static_cast<std::size_t>(i)];
    out.accuracy = evaluate(s2.params, prepared, {plan.test}, montage, mc);
    out.best_inner = s1.best_fold;
    out.best_val = s1.best_val_accuracy;
    out.stage2_warn = s2.diverged;
    out.params = std::move(s2.params);
  };

  const int jobs = std::min(tc.jobs, n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) run_fold(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&]() {
        // fold-level parallelism owns the cores; keep kernels serial here
        kernels::exec_mode() = kernels::Exec::Serial;
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_fold(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  CVReport& rep = result.report;
  double sum = 0.0;
  for (const FoldOutcome& out : outcomes) {
    rep.fold_accuracy.push_back(out.accuracy);
    rep.fold_best_inner.push_back(out.best_inner);
    rep.fold_best_val.push_back(out.best_val);
    rep.fold_stage2_warn.push_back(out.stage2_warn);
    sum += out.accuracy;
  }
  rep.mean_accuracy = sum / static_cast<double>(n);
  double var = 0.0;
  for (double a : rep.fold_accuracy) var += (a - rep.mean_accuracy) * (a - rep.mean_accuracy);
  rep.std_accuracy = std::sqrt(var / static_cast<double>(n));

  for (FoldOutcome& out : outcomes) result.fold_params.push_back(std::move(out.params));
  return result;
}

}  // namespace lgg
