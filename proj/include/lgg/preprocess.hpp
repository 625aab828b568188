#pragma once

#include <vector>

#include "lgg/trial.hpp"

namespace lgg {

enum class BaselineMode { Discard, SubtractMean };

struct PreprocessConfig {
  double target_rate = 128.0;
  double baseline_seconds = 3.0;
  BaselineMode baseline_mode = BaselineMode::Discard;
  double band_low = 4.0;
  double band_high = 45.0;
  int fir_taps = 255;  // odd tap count: type-I linear phase, integer delay
};

// Hamming-windowed sinc band-pass; taps must be odd, response symmetric.
std::vector<double> bandpass_fir(double low_hz, double high_hz, double sample_rate, int taps);

// Same-length filtering: reflect-pad both ends by the group delay and take
// the valid convolution, which also compensates the delay.
std::vector<double> filter_reflect(const std::vector<double>& x, const std::vector<double>& fir);

// Baseline removal, band-pass, integer decimation to the target rate, and
// per-sample average reference, in that order.
TrialSample preprocess(const TrialSample& trial, const PreprocessConfig& config);

}  // namespace lgg
