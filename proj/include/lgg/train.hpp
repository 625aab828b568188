#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgg/model.hpp"
#include "lgg/trial.hpp"

namespace lgg {

struct TrainConfig {
  double base_lr = 1e-2;
  double momentum = 0.9;
  int lr_step = 10;
  double lr_gamma = 0.1;
  int stage1_epochs = 25;
  int stage2_epochs = 5;
  double stage2_lr = 1e-3;
  int inner_folds = 5;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
  std::string canonical_text() const;
};

// A montage-selected, label-attached trial ready for the model.
struct LabeledTrial {
  Tensor signal;  // included channels x input_len
  int label = 0;
  int trial_id = 0;
};

// Binarizes `dimension` and keeps only the montage's included channel rows.
std::vector<LabeledTrial> prepare_trials(const std::vector<TrialSample>& trials,
                                         const MontageGraph& montage, const std::string& dimension,
                                         double threshold = 5.0);

// --- optimizer ---

// Classical momentum: v <- momentum*v + g; p <- p - lr*v.
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum);

struct SgdState {
  std::vector<Tensor> velocity;  // aligned with ModelParams::for_each_param order
};

// One step over every trainable tensor; throws ProtocolError on a non-finite
// gradient, naming the parameter.
void sgd_step_model(ModelParams& params, Graph& graph, SgdState& state, double lr, double momentum);

double lr_schedule(int epoch, const TrainConfig& config);

// --- protocol splits (all deterministic given the config seed) ---

std::vector<std::pair<int, std::vector<int>>> leave_one_trial_out(int n_trials);

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    const std::vector<int>& indices, int k, Rng& rng);

// Duplicates minority-class indices (uniform, with replacement) until the
// class counts match. Originals are all retained, order preserved.
std::vector<int> balance_classes(const std::vector<int>& indices, const std::vector<int>& labels,
                                 Rng& rng);

// The full split/balancing plan for one nested-CV run; run_nested_cv
// executes exactly this plan, so structural properties (test isolation,
// fold sizes, balancing scope) can be audited on the plan itself.
struct InnerPlan {
  std::vector<int> train;           // raw inner-fold training indices
  std::vector<int> train_balanced;  // after minority duplication
  std::vector<int> val;
};
struct OuterPlan {
  int test = -1;
  std::vector<int> train;                  // all non-test indices
  std::vector<InnerPlan> inner;
  std::vector<int> stage2_train_balanced;  // balanced combined training data
};
std::vector<OuterPlan> make_cv_plan(const std::vector<int>& labels, const TrainConfig& config);

// --- training stages ---

struct StageOneResult {
  ModelParams params;               // best fold's best-epoch checkpoint
  int best_fold = 0;
  double best_val_accuracy = -1.0;  // -1 when no epoch ran
  std::vector<double> fold_val_accuracy;
  std::vector<bool> fold_diverged;
};

StageOneResult train_stage1(const std::vector<LabeledTrial>& trials, const OuterPlan& plan,
                            const TrainConfig& tc, const ModelConfig& mc,
                            const MontageGraph& montage, int outer_index);

struct StageTwoResult {
  ModelParams params;
  bool diverged = false;  // candidate returned unchanged when set
};

StageTwoResult train_stage2(const ModelParams& candidate, const std::vector<LabeledTrial>& trials,
                            const OuterPlan& plan, const TrainConfig& tc, const ModelConfig& mc,
                            const MontageGraph& montage, int outer_index);

double evaluate(ModelParams& params, const std::vector<LabeledTrial>& trials,
                const std::vector<int>& indices, const MontageGraph& montage,
                const ModelConfig& mc);
double evaluate(ModelParams& params, const std::vector<LabeledTrial>& trials,
                const MontageGraph& montage, const ModelConfig& mc);

// --- nested cross-validation ---

struct CVReport {
  std::string dimension;
  std::uint64_t seed = 0;
  std::vector<double> fold_accuracy;
  std::vector<int> fold_best_inner;
  std::vector<double> fold_best_val;
  std::vector<bool> fold_stage2_warn;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<std::string> notes;
  std::string config_snapshot;

  bool skipped() const { return fold_accuracy.empty(); }
};

struct NestedCVResult {
  CVReport report;
  std::vector<ModelParams> fold_params;  // final (stage-2) model per outer fold
};

// Outer leave-one-trial-out, inner k-fold with two-stage training. The test
// trial is excluded before any balancing or splitting. Returns a skip report
// (see CVReport::skipped) when the dimension has a single class.
NestedCVResult run_nested_cv(const std::vector<TrialSample>& trials, const std::string& dimension,
                             const TrainConfig& tc, const ModelConfig& mc,
                             const MontageGraph& montage);

}  // namespace lgg
