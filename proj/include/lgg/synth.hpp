#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgg/trial.hpp"

namespace lgg {

// Desk-scale synthetic EEG: Gaussian noise everywhere, plus a class-dependent
// oscillation on the designated channels. Trials alternate classes, so the
// set is exactly balanced; ratings encode the class on every dimension.
struct SynthSpec {
  std::vector<std::string> channel_names;  // defaults to the 32-channel set
  int trials = 40;
  double sample_rate = 128.0;
  double duration_s = 1.0;
  std::vector<std::string> signal_channels = {"Fp1", "Fp2", "F3", "F4"};
  double signal_freq = 10.0;
  double amplitude = 3.0;
  double noise_level = 1.0;
  double rating_low = 2.0;
  double rating_high = 8.0;
  std::uint64_t seed = 7;

  void validate() const;
};

std::vector<TrialSample> synth_dataset(const SynthSpec& spec);

}  // namespace lgg
