#include "lgg/preprocess.hpp"

#include <cmath>
#include <numbers>

#include "lgg/errors.hpp"

namespace lgg {

std::vector<double> bandpass_fir(double low_hz, double high_hz, double sample_rate, int taps) {
  if (taps < 3 || taps % 2 == 0) throw ConfigError("bandpass_fir: taps must be odd and >= 3");
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < sample_rate / 2.0)) {
    throw ConfigError("bandpass_fir: need 0 < low < high < Nyquist");
  }
  const int m = (taps - 1) / 2;
  const double f_lo = low_hz / sample_rate;   // cycles per sample
  const double f_hi = high_hz / sample_rate;

  auto sinc_lp = [](double fc, int n) {
    // impulse response of an ideal low-pass with cutoff fc at offset n
    if (n == 0) return 2.0 * fc;
    const double x = 2.0 * std::numbers::pi * fc * n;
    return std::sin(x) / (std::numbers::pi * n);
  };

  std::vector<double> h(static_cast<std::size_t>(taps));
  for (int i = 0; i < taps; ++i) {
    const int n = i - m;
    const double ideal = sinc_lp(f_hi, n) - sinc_lp(f_lo, n);
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (taps - 1));
    h[static_cast<std::size_t>(i)] = ideal * w;
  }
  return h;
}

std::vector<double> filter_reflect(const std::vector<double>& x, const std::vector<double>& fir) {
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  const std::int64_t taps = static_cast<std::int64_t>(fir.size());
  const std::int64_t m = (taps - 1) / 2;
  if (n <= m) throw DataError("signal shorter than the filter warm-up region");

  // reflect without repeating the edge sample: x[m], ..., x[1], x[0..n-1], x[n-2], ...
  std::vector<double> padded(static_cast<std::size_t>(n + 2 * m));
  for (std::int64_t i = 0; i < m; ++i) padded[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(m - i)];
  for (std::int64_t i = 0; i < n; ++i) padded[static_cast<std::size_t>(m + i)] = x[static_cast<std::size_t>(i)];
  for (std::int64_t i = 0; i < m; ++i) {
    padded[static_cast<std::size_t>(m + n + i)] = x[static_cast<std::size_t>(n - 2 - i)];
  }

  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* win = padded.data() + i;
    for (std::int64_t k = 0; k < taps; ++k) acc += win[k] * fir[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

TrialSample preprocess(const TrialSample& trial, const PreprocessConfig& config) {
  trial.validate();
  const double src_rate = trial.sample_rate;
  if (config.target_rate <= 0.0) throw ConfigError("preprocess: target rate must be positive");
  const double ratio = src_rate / config.target_rate;
  const std::int64_t factor = static_cast<std::int64_t>(std::llround(ratio));
  if (factor < 1 || std::abs(ratio - static_cast<double>(factor)) > 1e-9) {
    throw DataError("preprocess: source rate " + std::to_string(src_rate) +
                    " is not an integer multiple of " + std::to_string(config.target_rate));
  }

  const std::int64_t c = trial.signal.extent(0);
  const std::int64_t len = trial.signal.extent(1);
  const std::int64_t baseline = static_cast<std::int64_t>(std::llround(config.baseline_seconds * src_rate));
  if (baseline < 0 || baseline >= len) {
    throw DataError("preprocess: trial is not longer than the baseline segment");
  }
  const std::int64_t body = len - baseline;

  const std::vector<double> fir = bandpass_fir(config.band_low, config.band_high, src_rate, config.fir_taps);
  const std::int64_t out_len = (body + factor - 1) / factor;  // ceil: keep every factor-th sample

  Tensor out_signal({c, out_len});
  std::vector<double> row(static_cast<std::size_t>(body));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const double* src = trial.signal.data() + ch * len;
    double base_mean = 0.0;
    if (config.baseline_mode == BaselineMode::SubtractMean && baseline > 0) {
      for (std::int64_t i = 0; i < baseline; ++i) base_mean += src[i];
      base_mean /= static_cast<double>(baseline);
    }
    for (std::int64_t i = 0; i < body; ++i) row[static_cast<std::size_t>(i)] = src[baseline + i] - base_mean;

    const std::vector<double> filtered = filter_reflect(row, fir);
    double* dst = out_signal.data() + ch * out_len;
    for (std::int64_t o = 0; o < out_len; ++o) dst[o] = filtered[static_cast<std::size_t>(o * factor)];
  }

  // average reference: remove the cross-channel mean at every sample
  for (std::int64_t o = 0; o < out_len; ++o) {
    double mean = 0.0;
    for (std::int64_t ch = 0; ch < c; ++ch) mean += out_signal[ch * out_len + o];
    mean /= static_cast<double>(c);
    for (std::int64_t ch = 0; ch < c; ++ch) out_signal[ch * out_len + o] -= mean;
  }

  TrialSample out = trial;
  out.signal = std::move(out_signal);
  out.sample_rate = config.target_rate;
  return out;
}

}  // namespace lgg
