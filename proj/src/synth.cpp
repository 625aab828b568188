#include "lgg/synth.hpp"

#include <cmath>
#include <numbers>

#include "lgg/errors.hpp"
#include "lgg/montage.hpp"
#include "lgg/rng.hpp"

namespace lgg {

namespace {
constexpr std::uint64_t kSynthSalt = 0x73796e74ull;
}

void SynthSpec::validate() const {
  if (trials < 1) throw ConfigError("synth: trial count must be >= 1");
  if (sample_rate <= 0.0 || duration_s <= 0.0) throw ConfigError("synth: rate and duration must be positive");
  if (signal_channels.empty()) throw ConfigError("synth: need at least one discriminative channel");
  if (signal_freq >= sample_rate / 2.0) throw ConfigError("synth: signal frequency must be below Nyquist");
  if (noise_level < 0.0 || amplitude < 0.0) throw ConfigError("synth: noise and amplitude must be >= 0");
  if (rating_low < 1.0 || rating_low > 9.0 || rating_high < 1.0 || rating_high > 9.0) {
    throw ConfigError("synth: ratings must lie in [1, 9]");
  }
}

std::vector<TrialSample> synth_dataset(const SynthSpec& spec) {
  spec.validate();
  const std::vector<std::string>& names =
      spec.channel_names.empty() ? deap32_channels() : spec.channel_names;

  std::vector<int> signal_idx;
  for (const std::string& ch : spec.signal_channels) {
    int idx = -1;
    for (int i = 0; i < static_cast<int>(names.size()); ++i) {
      if (names[static_cast<std::size_t>(i)] == ch) { idx = i; break; }
    }
    if (idx < 0) throw ConfigError("synth: discriminative channel '" + ch + "' not in the channel list");
    signal_idx.push_back(idx);
  }

  const std::int64_t c = static_cast<std::int64_t>(names.size());
  const std::int64_t len = static_cast<std::int64_t>(std::llround(spec.duration_s * spec.sample_rate));
  if (len < 2) throw ConfigError("synth: trial too short");

  std::vector<TrialSample> out;
  for (int ti = 0; ti < spec.trials; ++ti) {
    Rng rng = make_rng(spec.seed, {kSynthSalt, static_cast<std::uint64_t>(ti)});
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    const int cls = ti % 2;  // alternate -> balanced by construction
    TrialSample t;
    t.subject_id = 1;
    t.trial_id = ti;
    t.sample_rate = spec.sample_rate;
    t.channel_names = names;
    const double rating = cls == 1 ? spec.rating_high : spec.rating_low;
    t.ratings["arousal"] = rating;
    t.ratings["valence"] = rating;
    t.ratings["liking"] = rating;

    Tensor signal({c, len});
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double* row = signal.data() + ch * len;
      for (std::int64_t i = 0; i < len; ++i) row[i] = spec.noise_level * gauss(rng);
    }
    if (cls == 1 && spec.amplitude > 0.0) {
      for (int ch : signal_idx) {
        const double ph = phase(rng);
        double* row = signal.data() + static_cast<std::int64_t>(ch) * len;
        for (std::int64_t i = 0; i < len; ++i) {
          const double arg = 2.0 * std::numbers::pi * spec.signal_freq * static_cast<double>(i) /
                                 spec.sample_rate + ph;
          row[i] += spec.amplitude * std::sin(arg);
        }
      }
    } else {
      // consume the phase draws so class 0 and class 1 trials use the same
      // number of random values per channel set
      for (std::size_t k = 0; k < signal_idx.size(); ++k) (void)phase(rng);
    }
    t.signal = std::move(signal);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace lgg
