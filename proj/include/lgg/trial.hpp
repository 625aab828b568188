#pragma once

#include <map>
#include <string>
#include <vector>

#include "lgg/tensor.hpp"

namespace lgg {

enum class Label : int { Low = 0, High = 1 };

// One stimulus-aligned recording segment: the unit the classifier consumes.
struct TrialSample {
  Tensor signal;  // channels x time
  double sample_rate = 0.0;
  int subject_id = 0;
  int trial_id = 0;
  std::vector<std::string> channel_names;        // dataset order
  std::map<std::string, double> ratings;         // dimension -> [1, 9]

  std::int64_t channels() const { return signal.rank() == 2 ? signal.extent(0) : 0; }
  std::int64_t samples() const { return signal.rank() == 2 ? signal.extent(1) : 0; }
  void validate() const;
};

// rating > threshold -> High, rating <= threshold -> Low.
Label binarize_label(double rating, double threshold);

// Binary trial container (magic LGGT, little-endian). Bit-exact round-trip.
void write_trial_file(const TrialSample& trial, const std::string& path);
TrialSample read_trial_file(const std::string& path);

// Delimited text import: header row of channel names, one row per channel;
// sidecar metadata (key=value / rating.<dim>=value) supplies rate and ids.
TrialSample read_trial_csv(const std::string& csv_path, const std::string& meta_path);

}  // namespace lgg
