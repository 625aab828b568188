#pragma once

#include <map>
#include <string>

#include "lgg/model.hpp"
#include "lgg/preprocess.hpp"
#include "lgg/synth.hpp"
#include "lgg/train.hpp"

namespace lgg {

// Flat key=value settings with a fixed key universe. Layering: defaults,
// then a config document, then flag overrides; the resolved result is
// serialized into every run directory.
class RunConfig {
 public:
  static RunConfig defaults();

  void load_text(const std::string& text);   // overlay from a config document
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);  // flag overlay

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  std::string text() const;  // sorted key=value lines, fully resolved
  void save_file(const std::string& path) const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  PreprocessConfig preprocess_config() const;
  SynthSpec synth_spec() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace lgg
