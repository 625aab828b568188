#include "lgg/runconfig.hpp"

#include <fstream>
#include <sstream>

#include "lgg/errors.hpp"

namespace lgg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  const ModelConfig mc;
  const TrainConfig tc;
  const PreprocessConfig pc;
  const SynthSpec sp;

  auto& kv = c.kv_;
  kv["alpha"] = fmt(mc.alpha);
  kv["bn_eps"] = fmt(mc.bn_eps);
  kv["bn_momentum"] = fmt(mc.bn_momentum);
  kv["classes"] = std::to_string(mc.classes);
  kv["conv_stride"] = std::to_string(mc.conv_stride);
  kv["dropout_rate"] = fmt(mc.dropout_rate);
  kv["gcn_layers"] = std::to_string(mc.gcn_layers);
  kv["hidden"] = std::to_string(mc.hidden);
  kv["input_len"] = "0";  // resolved from the data when 0
  kv["leaky_slope"] = fmt(mc.leaky_slope);
  kv["levels"] = std::to_string(mc.levels);
  kv["pool2_stride"] = std::to_string(mc.pool2_stride);
  kv["pool2_window"] = std::to_string(mc.pool2_window);
  kv["pool_stride"] = std::to_string(mc.pool_stride);
  kv["pool_window"] = std::to_string(mc.pool_window);
  kv["sample_rate"] = fmt(mc.sample_rate);
  kv["skip_global"] = "0";
  kv["skip_local"] = "0";
  kv["t_kernels"] = std::to_string(mc.t_kernels);

  kv["base_lr"] = fmt(tc.base_lr);
  kv["batch_size"] = std::to_string(tc.batch_size);
  kv["inner_folds"] = std::to_string(tc.inner_folds);
  kv["jobs"] = std::to_string(tc.jobs);
  kv["lr_gamma"] = fmt(tc.lr_gamma);
  kv["lr_step"] = std::to_string(tc.lr_step);
  kv["momentum"] = fmt(tc.momentum);
  kv["seed"] = std::to_string(tc.seed);
  kv["stage1_epochs"] = std::to_string(tc.stage1_epochs);
  kv["stage2_epochs"] = std::to_string(tc.stage2_epochs);
  kv["stage2_lr"] = fmt(tc.stage2_lr);

  kv["pp_band_high"] = fmt(pc.band_high);
  kv["pp_band_low"] = fmt(pc.band_low);
  kv["pp_baseline_mode"] = "discard";
  kv["pp_baseline_seconds"] = fmt(pc.baseline_seconds);
  kv["pp_fir_taps"] = std::to_string(pc.fir_taps);
  kv["pp_target_rate"] = fmt(pc.target_rate);

  kv["synth_amplitude"] = fmt(sp.amplitude);
  kv["synth_duration_s"] = fmt(sp.duration_s);
  kv["synth_noise_level"] = fmt(sp.noise_level);
  kv["synth_rating_high"] = fmt(sp.rating_high);
  kv["synth_rating_low"] = fmt(sp.rating_low);
  kv["synth_sample_rate"] = fmt(sp.sample_rate);
  kv["synth_signal_channels"] = "Fp1,Fp2,F3,F4";
  kv["synth_signal_freq"] = fmt(sp.signal_freq);
  kv["synth_trials"] = std::to_string(sp.trials);

  kv["dimension"] = "arousal";
  kv["graph"] = "affective";
  kv["label_threshold"] = "5";
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: " + get(key));
  }
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: " + get(key));
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: " + v);
}

void RunConfig::load_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is missing '='");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  load_text(text);
}

std::string RunConfig::text() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << "=" << v << "\n";
  return os.str();
}

void RunConfig::save_file(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open config file for writing: " + path);
  f << text();
  if (!f) throw DataError("failed writing config file: " + path);
}

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.sample_rate = get_double("sample_rate");
  mc.input_len = get_int("input_len");
  mc.alpha = get_double("alpha");
  mc.levels = static_cast<int>(get_int("levels"));
  mc.t_kernels = static_cast<int>(get_int("t_kernels"));
  mc.conv_stride = get_int("conv_stride");
  mc.pool_window = get_int("pool_window");
  mc.pool_stride = get_int("pool_stride");
  mc.pool2_window = get_int("pool2_window");
  mc.pool2_stride = get_int("pool2_stride");
  mc.hidden = get_int("hidden");
  mc.gcn_layers = static_cast<int>(get_int("gcn_layers"));
  mc.dropout_rate = get_double("dropout_rate");
  mc.leaky_slope = get_double("leaky_slope");
  mc.classes = static_cast<int>(get_int("classes"));
  mc.bn_eps = get_double("bn_eps");
  mc.bn_momentum = get_double("bn_momentum");
  mc.skip_local = get_bool("skip_local");
  mc.skip_global = get_bool("skip_global");
  return mc;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.base_lr = get_double("base_lr");
  tc.momentum = get_double("momentum");
  tc.lr_step = static_cast<int>(get_int("lr_step"));
  tc.lr_gamma = get_double("lr_gamma");
  tc.stage1_epochs = static_cast<int>(get_int("stage1_epochs"));
  tc.stage2_epochs = static_cast<int>(get_int("stage2_epochs"));
  tc.stage2_lr = get_double("stage2_lr");
  tc.inner_folds = static_cast<int>(get_int("inner_folds"));
  tc.batch_size = static_cast<int>(get_int("batch_size"));
  tc.seed = static_cast<std::uint64_t>(get_int("seed"));
  tc.jobs = static_cast<int>(get_int("jobs"));
  return tc;
}

PreprocessConfig RunConfig::preprocess_config() const {
  PreprocessConfig pc;
  pc.target_rate = get_double("pp_target_rate");
  pc.baseline_seconds = get_double("pp_baseline_seconds");
  const std::string& mode = get("pp_baseline_mode");
  if (mode == "discard") {
    pc.baseline_mode = BaselineMode::Discard;
  } else if (mode == "subtract_mean") {
    pc.baseline_mode = BaselineMode::SubtractMean;
  } else {
    throw ConfigError("pp_baseline_mode must be 'discard' or 'subtract_mean'");
  }
  pc.band_low = get_double("pp_band_low");
  pc.band_high = get_double("pp_band_high");
  pc.fir_taps = static_cast<int>(get_int("pp_fir_taps"));
  return pc;
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec sp;
  sp.trials = static_cast<int>(get_int("synth_trials"));
  sp.sample_rate = get_double("synth_sample_rate");
  sp.duration_s = get_double("synth_duration_s");
  sp.signal_freq = get_double("synth_signal_freq");
  sp.amplitude = get_double("synth_amplitude");
  sp.noise_level = get_double("synth_noise_level");
  sp.rating_low = get_double("synth_rating_low");
  sp.rating_high = get_double("synth_rating_high");
  sp.seed = static_cast<std::uint64_t>(get_int("seed"));
  sp.signal_channels.clear();
  std::stringstream ss(get("synth_signal_channels"));
  std::string ch;
  while (std::getline(ss, ch, ',')) {
    ch = trim(ch);
    if (!ch.empty()) sp.signal_channels.push_back(ch);
  }
  return sp;
}

}  // namespace lgg
