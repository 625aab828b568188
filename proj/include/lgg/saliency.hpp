#pragma once

#include <string>
#include <vector>

#include "lgg/model.hpp"

namespace lgg {

// Per-channel saliency scores, max-normalized to [0, 1] unless all-zero.
struct SaliencyMap {
  std::vector<std::string> channels;
  std::vector<double> scores;
  std::string note;
};

// |d logit_pred / d input| averaged over time per channel. Eval mode with
// frozen batch-norm stats; dropout inert.
SaliencyMap saliency(ModelParams& params, const Tensor& trial_signal, const MontageGraph& montage,
                     const ModelConfig& config);

// Raw (pre-normalization) gradient tensor of the predicted-class logit with
// respect to the input; shared machinery for saliency and its tests.
Tensor saliency_input_gradient(ModelParams& params, const Tensor& trial_signal,
                               const MontageGraph& montage, const ModelConfig& config);

SaliencyMap aggregate_saliency(const std::vector<SaliencyMap>& maps);

// Two-column delimited text (channel, score), 15 significant digits.
void export_topomap(const SaliencyMap& map, const std::string& path);
SaliencyMap import_topomap(const std::string& path);

}  // namespace lgg
