#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "lgg/errors.hpp"
#include "lgg/preprocess.hpp"
#include "lgg/synth.hpp"
#include "lgg/trial.hpp"
#include "oracles.hpp"

using namespace lgg;

namespace {

TrialSample make_trial(std::int64_t c, std::int64_t len, double rate, std::mt19937_64& rng) {
  TrialSample t;
  t.signal = oracle::random_tensor({c, len}, rng);
  t.sample_rate = rate;
  t.subject_id = 3;
  t.trial_id = 17;
  for (std::int64_t i = 0; i < c; ++i) t.channel_names.push_back("ch" + std::to_string(i));
  t.ratings["arousal"] = 6.5;
  t.ratings["valence"] = 3.0;
  return t;
}

}  // namespace

TEST_CASE("trial files round-trip bit-exactly") {
  std::mt19937_64 rng(50);
  TrialSample t = make_trial(32, 7680, 128.0, rng);
  write_trial_file(t, "trial_roundtrip.lggt");
  TrialSample back = read_trial_file("trial_roundtrip.lggt");

  CHECK(back.subject_id == t.subject_id);
  CHECK(back.trial_id == t.trial_id);
  CHECK(back.sample_rate == t.sample_rate);
  CHECK(back.channel_names == t.channel_names);
  CHECK(back.ratings == t.ratings);
  REQUIRE(back.signal.shape() == t.signal.shape());
  bool identical = true;
  for (std::int64_t i = 0; i < t.signal.size(); ++i) {
    identical = identical && (back.signal[i] == t.signal[i]);
  }
  CHECK(identical);
  std::remove("trial_roundtrip.lggt");
}

TEST_CASE("trial file rejects bad magic without touching the payload") {
  {
    std::ofstream f("bad_trial.lggt", std::ios::binary);
    f << "XXXX this is not a trial";
  }
  CHECK_THROWS_AS(read_trial_file("bad_trial.lggt"), DataError);
  std::remove("bad_trial.lggt");
}

TEST_CASE("truncated trial file names the missing section") {
  std::mt19937_64 rng(51);
  TrialSample t = make_trial(4, 100, 128.0, rng);
  write_trial_file(t, "trunc_trial.lggt");
  std::ifstream in("trunc_trial.lggt", std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out("trunc_trial.lggt", std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size() - 64));
  }
  bool named = false;
  try {
    read_trial_file("trunc_trial.lggt");
  } catch (const DataError& e) {
    named = std::string(e.what()).find("signal") != std::string::npos;
  }
  CHECK(named);
  std::remove("trunc_trial.lggt");
}

TEST_CASE("csv import with sidecar metadata") {
  {
    std::ofstream csv("import_test.csv");
    csv << "c1, c2\n";
    csv << "1.5, 2.5, 3.5\n";
    csv << "-1, 0, 1\n";
  }
  {
    std::ofstream meta("import_test.meta");
    meta << "sample_rate = 256\n";
    meta << "subject_id = 9\n";
    meta << "trial_id = 4\n";
    meta << "rating.arousal = 7\n";
  }
  TrialSample t = read_trial_csv("import_test.csv", "import_test.meta");
  CHECK(t.channel_names == std::vector<std::string>{"c1", "c2"});
  CHECK(t.signal.shape() == std::vector<std::int64_t>{2, 3});
  CHECK(t.signal.at({0, 1}) == 2.5);
  CHECK(t.sample_rate == 256.0);
  CHECK(t.ratings.at("arousal") == 7.0);
  std::remove("import_test.csv");
  std::remove("import_test.meta");
}

TEST_CASE("binarize_label boundary behavior") {
  CHECK(binarize_label(9.0, 5.0) == Label::High);
  CHECK(binarize_label(1.0, 5.0) == Label::Low);
  CHECK(binarize_label(5.0, 5.0) == Label::Low);  // boundary goes low
  CHECK(binarize_label(5.0000001, 5.0) == Label::High);
  CHECK_THROWS_AS(binarize_label(0.5, 5.0), DataError);
  CHECK_THROWS_AS(binarize_label(9.5, 5.0), DataError);
}

TEST_CASE("bandpass FIR is linear phase (symmetric impulse response)") {
  const auto h = bandpass_fir(4.0, 45.0, 512.0, 255);
  REQUIRE(h.size() == 255);
  for (std::size_t i = 0; i < h.size() / 2; ++i) {
    CHECK(std::abs(h[i] - h[h.size() - 1 - i]) < 1e-15);
  }
  CHECK_THROWS_AS(bandpass_fir(4.0, 45.0, 512.0, 256), ConfigError);
  CHECK_THROWS_AS(bandpass_fir(45.0, 4.0, 512.0, 255), ConfigError);
}

TEST_CASE("preprocess: 63 s at 512 Hz becomes 60 s at 128 Hz") {
  std::mt19937_64 rng(52);
  TrialSample t = make_trial(32, 63 * 512, 512.0, rng);
  PreprocessConfig pc;
  TrialSample out = preprocess(t, pc);
  CHECK(out.signal.shape() == std::vector<std::int64_t>{32, 7680});
  CHECK(out.sample_rate == 128.0);

  // average reference: per-sample channel mean is zero
  for (std::int64_t s = 0; s < 50; ++s) {
    double mean = 0.0;
    for (std::int64_t ch = 0; ch < 32; ++ch) mean += out.signal.at({ch, s * 100});
    CHECK(std::abs(mean / 32.0) < 1e-12);
  }
}

TEST_CASE("preprocess attenuates a 60 Hz tone by at least 20 dB") {
  const double rate = 512.0;
  const std::int64_t len = 8 * 512;
  TrialSample t;
  t.sample_rate = rate;
  t.trial_id = 0;
  Tensor sig({2, len});
  for (std::int64_t i = 0; i < len; ++i) {
    const double v = std::sin(2.0 * std::numbers::pi * 60.0 * static_cast<double>(i) / rate);
    sig.at({0, i}) = v;
    sig.at({1, i}) = -v;  // keeps the average reference from cancelling everything
  }
  t.signal = sig;
  PreprocessConfig pc;
  pc.baseline_seconds = 1.0;
  TrialSample out = preprocess(t, pc);

  // skip filter edges, measure peak amplitude in the middle
  double peak = 0.0;
  const std::int64_t lo = out.signal.extent(1) / 4, hi = 3 * out.signal.extent(1) / 4;
  for (std::int64_t i = lo; i < hi; ++i) peak = std::max(peak, std::abs(out.signal.at({0, i})));
  CHECK(peak < 0.1);  // >= 20 dB down from unit amplitude

  // and a 10 Hz tone passes nearly untouched
  for (std::int64_t i = 0; i < len; ++i) {
    const double v = std::sin(2.0 * std::numbers::pi * 10.0 * static_cast<double>(i) / rate);
    sig.at({0, i}) = v;
    sig.at({1, i}) = -v;
  }
  t.signal = sig;
  TrialSample pass = preprocess(t, pc);
  double pass_peak = 0.0;
  for (std::int64_t i = lo; i < hi; ++i) pass_peak = std::max(pass_peak, std::abs(pass.signal.at({0, i})));
  CHECK(pass_peak > 0.9);
}

TEST_CASE("preprocess error paths") {
  std::mt19937_64 rng(53);
  PreprocessConfig pc;

  TrialSample bad_rate = make_trial(2, 2000, 300.0, rng);  // not a multiple of 128
  CHECK_THROWS_AS(preprocess(bad_rate, pc), DataError);

  TrialSample too_short = make_trial(2, 512, 512.0, rng);  // 1 s, shorter than 3 s baseline
  CHECK_THROWS_AS(preprocess(too_short, pc), DataError);
}

TEST_CASE("baseline handling: discard vs mean subtraction") {
  const std::int64_t len = 6 * 128;
  TrialSample t;
  t.sample_rate = 128.0;
  Tensor sig({1, len});
  for (std::int64_t i = 0; i < len; ++i) sig[i] = (i < 3 * 128) ? 4.0 : 10.0;
  t.signal = sig;

  PreprocessConfig pc;
  pc.band_low = 0.01;  // wide-open band so the DC shift survives filtering
  pc.band_high = 63.0;
  pc.fir_taps = 31;

  // single channel: average reference removes everything; use 2 channels
  Tensor sig2({2, len});
  for (std::int64_t i = 0; i < len; ++i) {
    sig2.at({0, i}) = sig[i];
    sig2.at({1, i}) = 0.0;
  }
  t.signal = sig2;

  TrialSample discarded = preprocess(t, pc);
  CHECK(discarded.signal.extent(1) == 3 * 128);

  pc.baseline_mode = BaselineMode::SubtractMean;
  TrialSample subtracted = preprocess(t, pc);
  CHECK(subtracted.signal.extent(1) == 3 * 128);
  // after subtracting the 4.0 baseline mean, channel 0 is ~6 against ~10
  const std::int64_t mid = 3 * 64;
  CHECK(subtracted.signal.at({0, mid}) < discarded.signal.at({0, mid}));
}

TEST_CASE("synthetic datasets are deterministic and class-separated") {
  SynthSpec spec;
  spec.trials = 6;
  spec.duration_s = 1.0;
  spec.seed = 123;

  auto a = synth_dataset(spec);
  auto b = synth_dataset(spec);
  REQUIRE(a.size() == 6);
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::int64_t k = 0; k < a[i].signal.size(); ++k) {
      identical = identical && (a[i].signal[k] == b[i].signal[k]);
    }
  }
  CHECK(identical);

  // alternating classes -> balanced ratings
  CHECK(a[0].ratings.at("arousal") == spec.rating_low);
  CHECK(a[1].ratings.at("arousal") == spec.rating_high);

  // band power at the recipe frequency separates the classes (noise-free)
  SynthSpec clean = spec;
  clean.noise_level = 0.0;
  auto trials = synth_dataset(clean);
  const std::int64_t len = trials[0].signal.extent(1);
  const int ch = [&] {
    for (int i = 0; i < static_cast<int>(trials[0].channel_names.size()); ++i) {
      if (trials[0].channel_names[static_cast<std::size_t>(i)] == "F3") return i;
    }
    return -1;
  }();
  REQUIRE(ch >= 0);
  auto band_power = [&](const TrialSample& t) {
    double re = 0.0, im = 0.0;
    for (std::int64_t i = 0; i < len; ++i) {
      const double arg = 2.0 * std::numbers::pi * clean.signal_freq * static_cast<double>(i) / clean.sample_rate;
      re += t.signal.at({ch, i}) * std::cos(arg);
      im += t.signal.at({ch, i}) * std::sin(arg);
    }
    return re * re + im * im;
  };
  CHECK(band_power(trials[0]) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(band_power(trials[1]) > 100.0);

  CHECK_THROWS_AS(synth_dataset([] { SynthSpec s; s.signal_freq = 100.0; return s; }()), ConfigError);
  CHECK_THROWS_AS(synth_dataset([] { SynthSpec s; s.trials = 0; return s; }()), ConfigError);
}
