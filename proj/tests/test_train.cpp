#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "lgg/errors.hpp"
#include "lgg/report.hpp"
#include "lgg/synth.hpp"
#include "lgg/train.hpp"
#include "oracles.hpp"
#include "toy.hpp"

using namespace lgg;

TEST_CASE("sgd_step momentum recurrence") {
  // momentum 0: plain gradient descent
  Tensor p = Tensor::scalar(1.0);
  Tensor g = Tensor::scalar(0.5);
  Tensor v = Tensor::scalar(0.0);
  sgd_step(p, g, v, 0.1, 0.0);
  CHECK(p.item() == doctest::Approx(0.95).epsilon(1e-15));

  // zero gradient, zero velocity: parameters unchanged
  Tensor p2 = Tensor::scalar(2.0);
  Tensor g0 = Tensor::scalar(0.0);
  Tensor v0 = Tensor::scalar(0.0);
  sgd_step(p2, g0, v0, 0.1, 0.9);
  CHECK(p2.item() == 2.0);

  // two steps with g = 1, lr = 0.1, momentum = 0.9 from p = 0
  Tensor p3 = Tensor::scalar(0.0);
  Tensor g1 = Tensor::scalar(1.0);
  Tensor v3 = Tensor::scalar(0.0);
  sgd_step(p3, g1, v3, 0.1, 0.9);
  CHECK(p3.item() == doctest::Approx(-0.1).epsilon(1e-15));
  sgd_step(p3, g1, v3, 0.1, 0.9);
  CHECK(p3.item() == doctest::Approx(-0.29).epsilon(1e-15));

  CHECK_THROWS_AS(sgd_step(p3, Tensor({2}), v3, 0.1, 0.9), ShapeError);
}

TEST_CASE("one sgd step on half squared norm shrinks by exactly (1 - lr)") {
  std::mt19937_64 rng(61);
  Tensor p = oracle::random_tensor({7}, rng);
  Tensor v = Tensor::zeros_like(p);
  Tensor grad = p;  // gradient of 0.5 * ||p||^2 is p itself
  const Tensor before = p;
  sgd_step(p, grad, v, 0.03, 0.0);
  for (std::int64_t i = 0; i < p.size(); ++i) {
    CHECK(p[i] == doctest::Approx((1.0 - 0.03) * before[i]).epsilon(1e-15));
  }
}

TEST_CASE("lr schedule steps down by gamma every lr_step epochs") {
  TrainConfig tc;
  CHECK(lr_schedule(0, tc) == doctest::Approx(1e-2).epsilon(1e-15));
  CHECK(lr_schedule(9, tc) == doctest::Approx(1e-2).epsilon(1e-15));
  CHECK(lr_schedule(10, tc) == doctest::Approx(1e-3).epsilon(1e-15));
  for (int e = 0; e <= 40; ++e) {
    const double want = tc.base_lr * std::pow(tc.lr_gamma, e / tc.lr_step);
    CHECK(lr_schedule(e, tc) == doctest::Approx(want).epsilon(1e-15));
  }
  CHECK_THROWS_AS(lr_schedule(-1, tc), ConfigError);
}

TEST_CASE("balance_classes duplicates the minority until counts match") {
  std::vector<int> labels(40, 0);
  for (int i = 10; i < 40; ++i) labels[static_cast<std::size_t>(i)] = 1;  // 10 low, 30 high
  std::vector<int> indices(40);
  std::iota(indices.begin(), indices.end(), 0);

  Rng rng(7);
  std::vector<int> balanced = balance_classes(indices, labels, rng);
  CHECK(balanced.size() == 60);
  int lo = 0, hi = 0;
  for (int idx : balanced) (labels[static_cast<std::size_t>(idx)] == 0 ? lo : hi)++;
  CHECK(lo == 30);
  CHECK(hi == 30);
  // originals all retained, in order, as a prefix
  for (int i = 0; i < 40; ++i) CHECK(balanced[static_cast<std::size_t>(i)] == i);
  // duplicates come from the minority class
  for (std::size_t i = 40; i < balanced.size(); ++i) {
    CHECK(labels[static_cast<std::size_t>(balanced[i])] == 0);
  }

  // already balanced: unchanged
  std::vector<int> even_labels = {0, 1, 0, 1};
  std::vector<int> even_idx = {0, 1, 2, 3};
  Rng rng2(7);
  CHECK(balance_classes(even_idx, even_labels, rng2) == even_idx);

  // determinism
  Rng ra(9), rb(9);
  CHECK(balance_classes(indices, labels, ra) == balance_classes(indices, labels, rb));

  // a class with no samples is a protocol error
  std::vector<int> mono(5, 1);
  std::vector<int> mono_idx = {0, 1, 2, 3, 4};
  Rng rc(1);
  CHECK_THROWS_AS(balance_classes(mono_idx, mono, rc), ProtocolError);
}

TEST_CASE("leave_one_trial_out covers every trial exactly once") {
  auto splits = leave_one_trial_out(40);
  CHECK(splits.size() == 40);
  std::set<int> tests;
  for (const auto& [test, train] : splits) {
    tests.insert(test);
    CHECK(train.size() == 39);
    for (int idx : train) CHECK(idx != test);
  }
  CHECK(tests.size() == 40);

  auto two = leave_one_trial_out(2);
  CHECK(two.size() == 2);
  CHECK(two[0].second == std::vector<int>{1});
  CHECK(two[1].second == std::vector<int>{0});

  CHECK_THROWS_AS(leave_one_trial_out(1), ProtocolError);
}

TEST_CASE("kfold_split partitions with near-equal sizes") {
  std::vector<int> indices(39);
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(3);
  auto folds = kfold_split(indices, 5, rng);
  REQUIRE(folds.size() == 5);

  std::multiset<std::size_t> sizes;
  std::set<int> validated;
  for (const auto& [train, val] : folds) {
    sizes.insert(val.size());
    CHECK(train.size() + val.size() == 39);
    for (int idx : val) CHECK(validated.insert(idx).second);  // validates exactly once
  }
  CHECK(validated.size() == 39);
  CHECK(sizes == std::multiset<std::size_t>{8, 8, 8, 8, 7});

  // k = count gives leave-one-out
  std::vector<int> five = {0, 1, 2, 3, 4};
  Rng rng2(4);
  auto loo = kfold_split(five, 5, rng2);
  for (const auto& [train, val] : loo) CHECK(val.size() == 1);

  Rng rng3(5);
  CHECK_THROWS_AS(kfold_split(five, 6, rng3), ProtocolError);
}

TEST_CASE("cv plan keeps the test trial out of every inner structure") {
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  TrainConfig tc;
  tc.seed = 77;
  auto plans = make_cv_plan(labels, tc);
  REQUIRE(plans.size() == 40);

  std::set<int> outer_tests;
  for (const auto& plan : plans) {
    outer_tests.insert(plan.test);
    for (int idx : plan.train) CHECK(idx != plan.test);
    CHECK(plan.inner.size() == 5);
    std::set<int> validated;
    for (const auto& inner : plan.inner) {
      for (int idx : inner.train) CHECK(idx != plan.test);
      for (int idx : inner.val) {
        CHECK(idx != plan.test);
        CHECK(validated.insert(idx).second);
      }
      for (int idx : inner.train_balanced) CHECK(idx != plan.test);  // no leakage via duplicates
    }
    CHECK(validated.size() == 39);
    for (int idx : plan.stage2_train_balanced) CHECK(idx != plan.test);

    // balanced sets have equal class counts
    int lo = 0, hi = 0;
    for (int idx : plan.stage2_train_balanced) (labels[static_cast<std::size_t>(idx)] == 0 ? lo : hi)++;
    CHECK(lo == hi);
  }
  CHECK(outer_tests.size() == 40);

  CHECK_THROWS_AS(make_cv_plan(std::vector<int>(4, 0), tc), ProtocolError);  // too few
}

namespace {

// tiny synthetic setup shared by the harness tests
struct Tiny {
  MontageGraph montage = toy::montage4();
  ModelConfig mc;
  TrainConfig tc;
  std::vector<TrialSample> trials;

  // 12 alternating trials: any 2/3-sized inner training fold of the 11
  // remaining spans both classes, so balancing can never fail structurally
  explicit Tiny(int n_trials = 12, double amplitude = 2.5, std::uint64_t seed = 5) {
    mc = toy::config4();
    mc.sample_rate = 16.0;
    mc.input_len = 64;
    mc.dropout_rate = 0.25;

    tc.seed = seed;
    tc.stage1_epochs = 4;
    tc.stage2_epochs = 2;
    tc.batch_size = 4;
    tc.inner_folds = 3;

    SynthSpec spec;
    spec.channel_names = {"ch1", "ch2", "ch3", "ch4"};
    spec.signal_channels = {"ch1", "ch2"};
    spec.trials = n_trials;
    spec.sample_rate = 16.0;
    spec.duration_s = 4.0;
    spec.signal_freq = 4.0;
    spec.amplitude = amplitude;
    spec.noise_level = 0.5;
    spec.seed = seed;
    trials = synth_dataset(spec);
  }
};

}  // namespace

TEST_CASE("evaluate counts argmax hits") {
  Tiny t;
  std::vector<LabeledTrial> prepared = prepare_trials(t.trials, t.montage, "arousal");
  REQUIRE(prepared.size() == t.trials.size());
  ModelParams params = init_params(t.mc, t.montage, 1);
  const double acc = evaluate(params, prepared, t.montage, t.mc);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);

  const double single = evaluate(params, prepared, {0}, t.montage, t.mc);
  CHECK((single == 0.0 || single == 1.0));

  CHECK_THROWS_AS(evaluate(params, prepared, std::vector<int>{}, t.montage, t.mc), ProtocolError);
}

TEST_CASE("stage 1 degenerate cap returns fold 0's initial parameters") {
  Tiny t;
  t.tc.stage1_epochs = 0;
  std::vector<LabeledTrial> prepared = prepare_trials(t.trials, t.montage, "arousal");
  std::vector<int> labels;
  for (const auto& lt : prepared) labels.push_back(lt.label);
  auto plans = make_cv_plan(labels, t.tc);

  StageOneResult r = train_stage1(prepared, plans[0], t.tc, t.mc, t.montage, 0);
  CHECK(r.best_fold == 0);
  CHECK(r.best_val_accuracy == -1.0);  // no epoch ever ran

  // matches a fresh fold-0 initialization bit for bit
  const std::uint64_t fold_seed = derive_seed(t.tc.seed, {0x666e6974ull, 0, 0});
  ModelParams expect = init_params(t.mc, t.montage, fold_seed);
  bool identical = true;
  std::vector<const Tensor*> got_list, want_list;
  r.params.for_each_state([&](const std::string&, Tensor& x) { got_list.push_back(&x); });
  expect.for_each_state([&](const std::string&, Tensor& x) { want_list.push_back(&x); });
  for (std::size_t i = 0; i < got_list.size(); ++i) {
    for (std::int64_t k = 0; k < got_list[i]->size(); ++k) {
      identical = identical && ((*got_list[i])[k] == (*want_list[i])[k]);
    }
  }
  CHECK(identical);
}

TEST_CASE("stage 2 degenerate cap returns the candidate unchanged") {
  Tiny t;
  t.tc.stage2_epochs = 0;
  std::vector<LabeledTrial> prepared = prepare_trials(t.trials, t.montage, "arousal");
  std::vector<int> labels;
  for (const auto& lt : prepared) labels.push_back(lt.label);
  auto plans = make_cv_plan(labels, t.tc);

  ModelParams candidate = init_params(t.mc, t.montage, 123);
  StageTwoResult r = train_stage2(candidate, prepared, plans[0], t.tc, t.mc, t.montage, 0);
  CHECK_FALSE(r.diverged);
  bool identical = true;
  std::vector<const Tensor*> a_list, b_list;
  r.params.for_each_state([&](const std::string&, Tensor& x) { a_list.push_back(&x); });
  candidate.for_each_state([&](const std::string&, Tensor& x) { b_list.push_back(&x); });
  for (std::size_t i = 0; i < a_list.size(); ++i) {
    for (std::int64_t k = 0; k < a_list[i]->size(); ++k) {
      identical = identical && ((*a_list[i])[k] == (*b_list[i])[k]);
    }
  }
  CHECK(identical);
}

TEST_CASE("nested cv aggregates correctly and is deterministic") {
  Tiny t;
  NestedCVResult a = run_nested_cv(t.trials, "arousal", t.tc, t.mc, t.montage);
  CHECK(a.report.fold_accuracy.size() == t.trials.size());
  CHECK(a.fold_params.size() == t.trials.size());

  double mean = 0.0;
  for (double acc : a.report.fold_accuracy) mean += acc;
  mean /= static_cast<double>(a.report.fold_accuracy.size());
  CHECK(std::abs(mean - a.report.mean_accuracy) < 1e-12);

  NestedCVResult b = run_nested_cv(t.trials, "arousal", t.tc, t.mc, t.montage);
  CHECK(serialize_report(a.report) == serialize_report(b.report));
}

TEST_CASE("nested cv is invariant to the worker count") {
  Tiny t;
  t.tc.stage1_epochs = 2;
  t.tc.stage2_epochs = 1;

  TrainConfig serial = t.tc;
  serial.jobs = 1;
  TrainConfig parallel = t.tc;
  parallel.jobs = 3;

  NestedCVResult a = run_nested_cv(t.trials, "arousal", serial, t.mc, t.montage);
  NestedCVResult b = run_nested_cv(t.trials, "arousal", parallel, t.mc, t.montage);
  // jobs is part of the config snapshot, so compare the numbers instead
  CHECK(a.report.fold_accuracy == b.report.fold_accuracy);
  CHECK(a.report.fold_best_inner == b.report.fold_best_inner);
  CHECK(a.report.fold_best_val == b.report.fold_best_val);
  CHECK(a.report.mean_accuracy == b.report.mean_accuracy);
}

TEST_CASE("single-class dimensions are skipped with an annotation") {
  Tiny t;
  for (auto& trial : t.trials) trial.ratings["dominance"] = 8.0;  // all high
  NestedCVResult r = run_nested_cv(t.trials, "dominance", t.tc, t.mc, t.montage);
  CHECK(r.report.skipped());
  REQUIRE_FALSE(r.report.notes.empty());
  CHECK(r.report.notes[0].find("single class") != std::string::npos);
}

TEST_CASE("nested cv learns a separable tiny problem") {
  Tiny t(10, /*amplitude=*/6.0);
  t.tc.stage1_epochs = 12;
  t.tc.base_lr = 5e-2;
  t.tc.stage2_lr = 5e-3;
  NestedCVResult r = run_nested_cv(t.trials, "arousal", t.tc, t.mc, t.montage);
  CHECK(r.report.mean_accuracy >= 0.8);
}

TEST_CASE("report serialization is stable and complete") {
  CVReport rep;
  rep.dimension = "valence";
  rep.seed = 9;
  rep.fold_accuracy = {1.0, 0.0, 1.0};
  rep.fold_best_inner = {0, 2, 1};
  rep.fold_best_val = {0.75, 0.5, 1.0};
  rep.fold_stage2_warn = {false, true, false};
  rep.mean_accuracy = 2.0 / 3.0;
  rep.std_accuracy = 0.47140452079103168;
  rep.config_snapshot = "alpha=0.5\nlevels=3\n";
  rep.notes.push_back("example");

  const std::string text = serialize_report(rep);
  CHECK(text.find("lgg-cv-report v1") == 0);
  CHECK(text.find("dimension: valence") != std::string::npos);
  CHECK(text.find("fold_accuracy: 1 0 1") != std::string::npos);
  CHECK(text.find("note: example") != std::string::npos);
  CHECK(text.find("  alpha=0.5") != std::string::npos);
  CHECK(serialize_report(rep) == text);
}
