#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "lgg/checkpoint.hpp"
#include "lgg/errors.hpp"
#include "lgg/preprocess.hpp"
#include "lgg/report.hpp"
#include "lgg/runconfig.hpp"
#include "lgg/saliency.hpp"
#include "lgg/synth.hpp"
#include "lgg/train.hpp"

namespace fs = std::filesystem;
using namespace lgg;

namespace {

// distinct exit codes per error family
constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitProtocol = 4;

int log_level() {
  const char* v = std::getenv("LGG_LOG");
  return v ? std::atoi(v) : 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[lgg] " << msg << "\n";
}

std::vector<fs::path> sorted_files(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<TrialSample> load_trials(const std::string& dir) {
  std::vector<TrialSample> trials;
  for (const fs::path& p : sorted_files(dir, ".lggt")) trials.push_back(read_trial_file(p.string()));
  if (trials.empty()) throw DataError("no .lggt trial files in " + dir);
  for (const TrialSample& t : trials) {
    if (t.channel_names != trials[0].channel_names || t.sample_rate != trials[0].sample_rate ||
        t.samples() != trials[0].samples()) {
      throw DataError("trials disagree on channels, rate, or length (trial " +
                      std::to_string(t.trial_id) + ")");
    }
  }
  return trials;
}

MontageGraph resolve_montage(const std::string& graph, const std::vector<std::string>& channels) {
  if (graph == "general" || graph == "affective" || graph == "hemisphere") {
    ChannelSet set;
    if (channels == deap32_channels()) {
      set = ChannelSet::Deap32;
    } else if (channels == std62_channels()) {
      set = ChannelSet::Std62;
    } else {
      throw ConfigError("built-in graph '" + graph +
                        "' needs the 32- or 62-channel layout; provide a custom montage file");
    }
    return builtin_graph(graph_kind_from_name(graph), set);
  }
  std::ifstream f(graph);
  if (!f) throw ConfigError("montage file not found: " + graph);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_montage(text);
}

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string dimension, graph, out, data;
  std::int64_t seed = -1;
  int jobs = 0, t_kernels = 0;
  bool no_local = false, no_global = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "config document (key=value lines)");
  cmd->add_option("--set", flags.overrides, "override any config key (key=value, repeatable)");
  cmd->add_option("--seed", flags.seed, "root seed");
  cmd->add_option("--jobs", flags.jobs, "worker count for outer folds (1 = serial)");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig rc = RunConfig::defaults();
  if (!flags.config_path.empty()) rc.load_file(flags.config_path);
  for (const std::string& kv : flags.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set needs key=value, got '" + kv + "'");
    rc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed >= 0) rc.set("seed", std::to_string(flags.seed));
  if (flags.jobs > 0) rc.set("jobs", std::to_string(flags.jobs));
  if (flags.t_kernels > 0) rc.set("t_kernels", std::to_string(flags.t_kernels));
  if (!flags.dimension.empty()) rc.set("dimension", flags.dimension);
  if (!flags.graph.empty()) rc.set("graph", flags.graph);
  if (flags.no_local) rc.set("skip_local", "1");
  if (flags.no_global) rc.set("skip_global", "1");
  return rc;
}

int cmd_synth(const CommonFlags& flags) {
  RunConfig rc = resolve_config(flags);
  if (flags.out.empty()) throw ConfigError("synth: --out is required");
  SynthSpec spec = rc.synth_spec();
  std::vector<TrialSample> trials = synth_dataset(spec);

  fs::create_directories(flags.out);
  std::ofstream manifest(fs::path(flags.out) / "manifest.txt", std::ios::trunc);
  if (!manifest) throw DataError("cannot write manifest in " + flags.out);
  for (const TrialSample& t : trials) {
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%03d.lggt", t.trial_id);
    write_trial_file(t, (fs::path(flags.out) / name).string());
    manifest << name << "\n";
  }
  rc.save_file((fs::path(flags.out) / "run_config.txt").string());
  std::cout << "wrote " << trials.size() << " trials to " << flags.out << "\n";
  return kExitOk;
}

int cmd_preprocess(const CommonFlags& flags) {
  RunConfig rc = resolve_config(flags);
  if (flags.data.empty() || flags.out.empty()) throw ConfigError("preprocess: --data and --out are required");
  const PreprocessConfig pc = rc.preprocess_config();

  std::vector<TrialSample> trials;
  for (const fs::path& p : sorted_files(flags.data, ".lggt")) trials.push_back(read_trial_file(p.string()));
  for (const fs::path& p : sorted_files(flags.data, ".csv")) {
    fs::path meta = p;
    meta.replace_extension(".meta");
    if (!fs::exists(meta)) throw DataError("csv trial is missing its sidecar metadata: " + meta.string());
    trials.push_back(read_trial_csv(p.string(), meta.string()));
  }
  if (trials.empty()) throw DataError("no trial files (.lggt or .csv) in " + flags.data);

  fs::create_directories(flags.out);
  for (const TrialSample& t : trials) {
    TrialSample processed = preprocess(t, pc);
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%03d.lggt", processed.trial_id);
    write_trial_file(processed, (fs::path(flags.out) / name).string());
  }
  rc.save_file((fs::path(flags.out) / "run_config.txt").string());
  std::cout << "preprocessed " << trials.size() << " trials to " << flags.out << "\n";
  return kExitOk;
}

// Fills data-derived keys and checks rate agreement between data and model.
ModelConfig finalize_model_config(RunConfig& rc, const std::vector<TrialSample>& trials) {
  if (rc.get_int("input_len") == 0) rc.set("input_len", std::to_string(trials[0].samples()));
  ModelConfig mc = rc.model_config();
  if (mc.input_len != trials[0].samples()) {
    throw DataError("config input_len " + std::to_string(mc.input_len) + " != trial length " +
                    std::to_string(trials[0].samples()));
  }
  if (mc.sample_rate != trials[0].sample_rate) {
    throw DataError("config sample_rate " + std::to_string(mc.sample_rate) +
                    " != trial rate " + std::to_string(trials[0].sample_rate) +
                    "; set sample_rate explicitly if intended");
  }
  return mc;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig rc = resolve_config(flags);
  if (flags.data.empty() || flags.out.empty()) throw ConfigError("train: --data and --out are required");

  std::vector<TrialSample> trials = load_trials(flags.data);
  MontageGraph montage = resolve_montage(rc.get("graph"), trials[0].channel_names);
  const auto issues = validate(montage, trials[0].channel_names);
  if (!issues.empty()) throw DataError("montage validation failed: " + issues[0].message);

  ModelConfig mc = finalize_model_config(rc, trials);
  TrainConfig tc = rc.train_config();
  mc.validate();
  tc.validate();

  log_info("montage '" + rc.get("graph") + "': P = " + std::to_string(montage.num_locals()) +
           ", included channels = " + std::to_string(montage.included_channels().size()));
  std::cout << "graph " << rc.get("graph") << ": P = " << montage.num_locals() << "\n";

  NestedCVResult result = run_nested_cv(trials, rc.get("dimension"), tc, mc, montage);
  if (result.report.skipped()) {
    std::cerr << "protocol: " << result.report.notes.front() << "\n";
    return kExitProtocol;
  }

  fs::create_directories(flags.out);
  rc.save_file((fs::path(flags.out) / "run_config.txt").string());
  {
    std::ofstream mf((fs::path(flags.out) / "montage.txt"), std::ios::trunc);
    mf << serialize_montage(montage);
  }
  write_report(result.report, (fs::path(flags.out) / "cv_report.txt").string());

  const std::uint64_t cfg_digest = config_digest(mc);
  const std::uint64_t mnt_digest = montage_digest(montage);
  for (std::size_t i = 0; i < result.fold_params.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "fold_%03zu.ckpt", i);
    save_checkpoint((fs::path(flags.out) / name).string(), result.fold_params[i], cfg_digest,
                    mnt_digest);
  }

  std::cout << "dimension " << result.report.dimension << ": mean accuracy "
            << result.report.mean_accuracy << " (std " << result.report.std_accuracy << ") over "
            << result.report.fold_accuracy.size() << " folds\n";
  std::cout << "report: " << (fs::path(flags.out) / "cv_report.txt").string() << "\n";
  return kExitOk;
}

// Shared setup for eval/saliency: load run-dir artifacts and check digests.
struct LoadedModel {
  ModelConfig mc;
  MontageGraph montage;
  ModelParams params;
  RunConfig rc;
};

LoadedModel load_model(const std::string& checkpoint_path, const CommonFlags& flags,
                       const std::vector<TrialSample>& trials) {
  const fs::path run_dir = fs::path(checkpoint_path).parent_path();
  CommonFlags effective = flags;
  if (effective.config_path.empty()) {
    const fs::path cfg = run_dir / "run_config.txt";
    if (!fs::exists(cfg)) throw ConfigError("no --config given and " + cfg.string() + " not found");
    effective.config_path = cfg.string();
  }
  RunConfig rc = resolve_config(effective);

  MontageGraph montage;
  const fs::path montage_file = run_dir / "montage.txt";
  if (fs::exists(montage_file) && flags.graph.empty()) {
    std::ifstream f(montage_file);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    montage = parse_montage(text);
  } else {
    montage = resolve_montage(rc.get("graph"), trials[0].channel_names);
  }

  RunConfig rc_model = rc;
  ModelConfig mc = finalize_model_config(rc_model, trials);

  Checkpoint ckpt = read_checkpoint(checkpoint_path);
  if (ckpt.config_digest != config_digest(mc)) {
    throw DataError("checkpoint config digest does not match the resolved model config; refusing");
  }
  if (ckpt.montage_digest != montage_digest(montage)) {
    throw DataError("checkpoint montage digest does not match the resolved montage; refusing");
  }
  ModelParams params = init_params(mc, montage, 0);
  apply_checkpoint(ckpt, params);
  return LoadedModel{mc, montage, std::move(params), rc};
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path) {
  if (flags.data.empty()) throw ConfigError("eval: --data is required");
  std::vector<TrialSample> trials = load_trials(flags.data);
  LoadedModel lm = load_model(checkpoint_path, flags, trials);

  std::vector<LabeledTrial> prepared =
      prepare_trials(trials, lm.montage, lm.rc.get("dimension"), lm.rc.get_double("label_threshold"));
  Rng rng(0);
  int hits = 0;
  for (const LabeledTrial& t : prepared) {
    Tensor probs = forward(t.signal, lm.params, lm.montage, lm.mc, Mode::Eval, rng);
    int argmax = 0;
    for (std::int64_t j = 1; j < probs.size(); ++j) {
      if (probs[j] > probs[argmax]) argmax = static_cast<int>(j);
    }
    if (argmax == t.label) ++hits;
    std::cout << "trial " << t.trial_id << ": predicted " << (argmax == 1 ? "high" : "low")
              << " (p_high = " << probs[1] << "), label " << (t.label == 1 ? "high" : "low") << "\n";
  }
  std::cout << "accuracy: " << (static_cast<double>(hits) / static_cast<double>(prepared.size()))
            << " over " << prepared.size() << " trials\n";
  return kExitOk;
}

int cmd_saliency(const CommonFlags& flags, const std::string& checkpoint_path) {
  if (flags.data.empty() || flags.out.empty()) throw ConfigError("saliency: --data and --out are required");
  std::vector<TrialSample> trials = load_trials(flags.data);
  LoadedModel lm = load_model(checkpoint_path, flags, trials);

  std::vector<LabeledTrial> prepared =
      prepare_trials(trials, lm.montage, lm.rc.get("dimension"), lm.rc.get_double("label_threshold"));

  fs::create_directories(flags.out);
  std::vector<SaliencyMap> maps;
  for (const LabeledTrial& t : prepared) {
    SaliencyMap map = saliency(lm.params, t.signal, lm.montage, lm.mc);
    char name[48];
    std::snprintf(name, sizeof(name), "saliency_trial_%03d.txt", t.trial_id);
    export_topomap(map, (fs::path(flags.out) / name).string());
    maps.push_back(std::move(map));
  }
  SaliencyMap mean = aggregate_saliency(maps);
  export_topomap(mean, (fs::path(flags.out) / "saliency_mean.txt").string());
  std::cout << "wrote " << maps.size() << " per-trial maps and saliency_mean.txt to " << flags.out
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LGG: local-global-graph EEG classifier"};
  app.require_subcommand(1);

  CommonFlags synth_flags, pp_flags, train_flags, eval_flags, sal_flags;
  std::string eval_ckpt, sal_ckpt;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic trial set");
  add_common(synth, synth_flags);
  synth->add_option("--out", synth_flags.out, "output directory")->required();

  CLI::App* pp = app.add_subcommand("preprocess", "baseline removal, band-pass, decimation, average reference");
  add_common(pp, pp_flags);
  pp->add_option("--data", pp_flags.data, "input trial directory (.lggt or .csv + .meta)")->required();
  pp->add_option("--out", pp_flags.out, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "nested leave-one-trial-out cross-validation");
  add_common(train, train_flags);
  train->add_option("--data", train_flags.data, "trial directory")->required();
  train->add_option("--out", train_flags.out, "run directory")->required();
  train->add_option("--dimension", train_flags.dimension, "arousal | valence | liking");
  train->add_option("--graph", train_flags.graph, "general | affective | hemisphere | <montage file>");
  train->add_option("--t-kernels", train_flags.t_kernels, "temporal kernels per level");
  train->add_flag("--no-local", train_flags.no_local, "ablation: remove local graph filtering");
  train->add_flag("--no-global", train_flags.no_global, "ablation: remove global graph filtering");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a trial set");
  add_common(eval, eval_flags);
  eval->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_flags.data, "trial directory")->required();
  eval->add_option("--dimension", eval_flags.dimension, "label dimension");
  eval->add_option("--graph", eval_flags.graph, "override montage");

  CLI::App* sal = app.add_subcommand("saliency", "export per-trial and aggregated saliency topomaps");
  add_common(sal, sal_flags);
  sal->add_option("checkpoint", sal_ckpt, "checkpoint file")->required();
  sal->add_option("--data", sal_flags.data, "trial directory")->required();
  sal->add_option("--out", sal_flags.out, "output directory")->required();
  sal->add_option("--dimension", sal_flags.dimension, "label dimension");
  sal->add_option("--graph", sal_flags.graph, "override montage");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_flags);
    if (pp->parsed()) return cmd_preprocess(pp_flags);
    if (train->parsed()) return cmd_train(train_flags);
    if (eval->parsed()) return cmd_eval(eval_flags, eval_ckpt);
    if (sal->parsed()) return cmd_saliency(sal_flags, sal_ckpt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
