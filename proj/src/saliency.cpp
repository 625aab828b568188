#include "lgg/saliency.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lgg/errors.hpp"

namespace lgg {

Tensor saliency_input_gradient(ModelParams& params, const Tensor& trial_signal,
                               const MontageGraph& montage, const ModelConfig& config) {
  if (trial_signal.rank() != 2) throw ShapeError("saliency: trial signal must be channels x time");

  Graph g;
  Tensor x = trial_signal;
  g.track(x);
  Rng rng(0);  // dropout is inert in eval mode
  Tensor logits = forward_logits(x, params, montage, config, Mode::Eval, rng, &g);

  // predicted class = argmax logit; its pre-softmax score is the target
  int pred = 0;
  for (std::int64_t j = 1; j < logits.extent(1); ++j) {
    if (logits[j] > logits[pred]) pred = static_cast<int>(j);
  }
  Tensor onehot({logits.extent(0), logits.extent(1)});
  onehot[pred] = 1.0;
  Tensor target = ops::reduce_sum(ops::hadamard(logits, onehot, &g), &g);
  g.backward(target);

  Tensor grad = g.grad(x.node);
  if (!grad.all_finite()) throw Error("saliency: non-finite input gradient");
  return grad;
}

SaliencyMap saliency(ModelParams& params, const Tensor& trial_signal, const MontageGraph& montage,
                     const ModelConfig& config) {
  Tensor grad = saliency_input_gradient(params, trial_signal, montage, config);
  const std::int64_t c = grad.extent(0), l = grad.extent(1);

  SaliencyMap map;
  map.channels = montage.included_channel_names();
  if (static_cast<std::int64_t>(map.channels.size()) != c) {
    throw ShapeError("saliency: montage channel count does not match the signal");
  }
  map.scores.resize(static_cast<std::size_t>(c));
  double peak = 0.0;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < l; ++i) acc += std::abs(grad[ch * l + i]);
    map.scores[static_cast<std::size_t>(ch)] = acc / static_cast<double>(l);
    peak = std::max(peak, map.scores[static_cast<std::size_t>(ch)]);
  }
  if (peak > 0.0) {
    for (double& s : map.scores) s /= peak;
    map.note = "max-normalized";
  } else {
    map.note = "all-zero gradient; normalization skipped";
  }
  return map;
}

SaliencyMap aggregate_saliency(const std::vector<SaliencyMap>& maps) {
  if (maps.empty()) throw DataError("aggregate_saliency: no maps");
  for (const SaliencyMap& m : maps) {
    if (m.channels != maps[0].channels) {
      throw DataError("aggregate_saliency: channel sets differ");
    }
  }
  SaliencyMap out;
  out.channels = maps[0].channels;
  out.scores.assign(out.channels.size(), 0.0);
  for (const SaliencyMap& m : maps) {
    for (std::size_t i = 0; i < out.scores.size(); ++i) out.scores[i] += m.scores[i];
  }
  double peak = 0.0;
  for (double& s : out.scores) {
    s /= static_cast<double>(maps.size());
    peak = std::max(peak, s);
  }
  if (peak > 0.0) {
    for (double& s : out.scores) s /= peak;
    out.note = "mean of " + std::to_string(maps.size()) + " maps, re-normalized";
  } else {
    out.note = "mean of " + std::to_string(maps.size()) + " maps; all zero";
  }
  return out;
}

void export_topomap(const SaliencyMap& map, const std::string& path) {
  if (map.channels.size() != map.scores.size()) throw DataError("topomap: channel/score size mismatch");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open topomap file for writing: " + path);
  f << "channel,score\n";
  f << std::setprecision(15);
  for (std::size_t i = 0; i < map.channels.size(); ++i) {
    f << map.channels[i] << "," << map.scores[i] << "\n";
  }
  if (!f) throw DataError("failed writing topomap: " + path);
}

SaliencyMap import_topomap(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open topomap file: " + path);
  SaliencyMap map;
  std::string line;
  if (!std::getline(f, line) || line != "channel,score") {
    throw DataError("topomap missing 'channel,score' header: " + path);
  }
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw DataError("topomap row missing comma: " + line);
    map.channels.push_back(line.substr(0, comma));
    map.scores.push_back(std::stod(line.substr(comma + 1)));
  }
  return map;
}

}  // namespace lgg
