#pragma once

#include <string>
#include <vector>

#include "lgg/tensor.hpp"

namespace lgg {

enum class GraphKind { General, Affective, Hemisphere, Custom };
enum class ChannelSet { Deap32, Std62 };

std::string graph_kind_name(GraphKind kind);
GraphKind graph_kind_from_name(const std::string& name);

struct LocalGraph {
  std::string name;
  std::vector<int> channels;  // indices into MontageGraph::channels
};

// An EEG montage: the dataset channel order plus a partition of the
// included channels into named local graphs. Channels in no local graph are
// excluded from the model input.
struct MontageGraph {
  std::vector<std::string> channels;
  std::vector<LocalGraph> locals;
  GraphKind kind = GraphKind::Custom;

  int num_locals() const { return static_cast<int>(locals.size()); }

  // Included channel indices in dataset order.
  std::vector<int> included_channels() const;
  std::vector<std::string> included_channel_names() const;

  // Local graphs re-indexed against the included-channel rows (the model's
  // input rows). locals[p] maps to model_groups()[p].
  std::vector<std::vector<int>> model_groups() const;

  int channel_index(const std::string& name) const;  // -1 when absent
};

// Q x Q all-ones adjacency of one local graph.
Tensor local_adjacency(const LocalGraph& local);

// Line-based config: `channels: <names>` header, one `local <name>: <names>`
// per local graph, optional `kind: <name>`, `#` comments. Order significant.
MontageGraph parse_montage(const std::string& text);
std::string serialize_montage(const MontageGraph& montage);

MontageGraph builtin_graph(GraphKind kind, ChannelSet channel_set);

const std::vector<std::string>& deap32_channels();
const std::vector<std::string>& std62_channels();

// 10-20 left/right mirror: trailing odd digit <-> even digit, midline (z)
// maps to itself. mirror("F3") == "F4", mirror("Cz") == "Cz".
std::string mirror_channel(const std::string& name);
bool is_frontal_channel(const std::string& name);
bool is_midline_channel(const std::string& name);

struct ValidationIssue {
  std::string message;
};

// Checks index coverage, disjointness, non-emptiness, name resolution
// against the dataset channel list, and for affective montages the frontal
// left/right symmetry and frontal-midline exclusion.
std::vector<ValidationIssue> validate(const MontageGraph& montage,
                                      const std::vector<std::string>& dataset_channels);

}  // namespace lgg
