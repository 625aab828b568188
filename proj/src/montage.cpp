#include "lgg/montage.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "lgg/errors.hpp"

namespace lgg {

std::string graph_kind_name(GraphKind kind) {
  switch (kind) {
    case GraphKind::General: return "general";
    case GraphKind::Affective: return "affective";
    case GraphKind::Hemisphere: return "hemisphere";
    case GraphKind::Custom: return "custom";
  }
  return "custom";
}

GraphKind graph_kind_from_name(const std::string& name) {
  if (name == "general") return GraphKind::General;
  if (name == "affective") return GraphKind::Affective;
  if (name == "hemisphere") return GraphKind::Hemisphere;
  if (name == "custom") return GraphKind::Custom;
  throw ConfigError("unknown graph kind '" + name + "'");
}

std::vector<int> MontageGraph::included_channels() const {
  std::set<int> used;
  for (const auto& local : locals) used.insert(local.channels.begin(), local.channels.end());
  std::vector<int> result;
  for (int i = 0; i < static_cast<int>(channels.size()); ++i) {
    if (used.count(i)) result.push_back(i);
  }
  return result;
}

std::vector<std::string> MontageGraph::included_channel_names() const {
  std::vector<std::string> names;
  for (int i : included_channels()) names.push_back(channels[static_cast<std::size_t>(i)]);
  return names;
}

std::vector<std::vector<int>> MontageGraph::model_groups() const {
  const std::vector<int> included = included_channels();
  std::map<int, int> row_of;
  for (int r = 0; r < static_cast<int>(included.size()); ++r) row_of[included[static_cast<std::size_t>(r)]] = r;
  std::vector<std::vector<int>> groups;
  for (const auto& local : locals) {
    std::vector<int> rows;
    for (int ch : local.channels) rows.push_back(row_of.at(ch));
    groups.push_back(std::move(rows));
  }
  return groups;
}

int MontageGraph::channel_index(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(channels.size()); ++i) {
    if (channels[static_cast<std::size_t>(i)] == name) return i;
  }
  return -1;
}

Tensor local_adjacency(const LocalGraph& local) {
  if (local.channels.empty()) throw ShapeError("local_adjacency: empty local graph");
  const std::int64_t q = static_cast<std::int64_t>(local.channels.size());
  return Tensor::full({q, q}, 1.0);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

MontageGraph parse_montage(const std::string& text) {
  MontageGraph m;
  std::istringstream in(text);
  std::string line;
  bool have_channels = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.rfind("channels:", 0) == 0) {
      if (have_channels) throw DataError("montage line " + std::to_string(lineno) + ": duplicate channels header");
      m.channels = split_csv(line.substr(9));
      if (m.channels.empty()) throw DataError("montage: empty channel list");
      have_channels = true;
    } else if (line.rfind("kind:", 0) == 0) {
      m.kind = graph_kind_from_name(trim(line.substr(5)));
    } else if (line.rfind("local ", 0) == 0) {
      if (!have_channels) throw DataError("montage: 'channels:' header must come first");
      const std::size_t colon = line.find(':');
      if (colon == std::string::npos) throw DataError("montage line " + std::to_string(lineno) + ": missing ':'");
      LocalGraph local;
      local.name = trim(line.substr(6, colon - 6));
      if (local.name.empty()) throw DataError("montage line " + std::to_string(lineno) + ": local graph needs a name");
      for (const std::string& ch : split_csv(line.substr(colon + 1))) {
        const int idx = m.channel_index(ch);
        if (idx < 0) {
          throw DataError("montage line " + std::to_string(lineno) + ": unknown channel '" + ch + "'");
        }
        local.channels.push_back(idx);
      }
      if (local.channels.empty()) throw DataError("montage: local graph '" + local.name + "' is empty");
      m.locals.push_back(std::move(local));
    } else {
      throw DataError("montage line " + std::to_string(lineno) + ": unrecognized directive");
    }
  }
  if (!have_channels) throw DataError("montage: missing 'channels:' header");
  if (m.locals.empty()) throw DataError("montage: no local graphs defined");

  std::set<int> seen;
  for (const auto& local : m.locals) {
    for (int ch : local.channels) {
      if (!seen.insert(ch).second) {
        throw DataError("montage: channel '" + m.channels[static_cast<std::size_t>(ch)] +
                        "' appears in more than one local graph");
      }
    }
  }
  return m;
}

std::string serialize_montage(const MontageGraph& m) {
  std::ostringstream out;
  out << "kind: " << graph_kind_name(m.kind) << "\n";
  out << "channels: ";
  for (std::size_t i = 0; i < m.channels.size(); ++i) {
    if (i) out << ", ";
    out << m.channels[i];
  }
  out << "\n";
  for (const auto& local : m.locals) {
    out << "local " << local.name << ": ";
    for (std::size_t i = 0; i < local.channels.size(); ++i) {
      if (i) out << ", ";
      out << m.channels[static_cast<std::size_t>(local.channels[i])];
    }
    out << "\n";
  }
  return out.str();
}

const std::vector<std::string>& deap32_channels() {
  static const std::vector<std::string> names = {
      "Fp1", "AF3", "F3",  "F7",  "FC5", "FC1", "C3",  "T7",  "CP5", "CP1", "P3",
      "P7",  "PO3", "O1",  "Oz",  "Pz",  "Fp2", "AF4", "Fz",  "F4",  "F8",  "FC6",
      "FC2", "Cz",  "C4",  "T8",  "CP6", "CP2", "P4",  "P8",  "PO4", "O2"};
  return names;
}

const std::vector<std::string>& std62_channels() {
  static const std::vector<std::string> names = {
      "Fp1", "Fpz", "Fp2", "AF3", "AF4", "F7",  "F5",  "F3",  "F1",  "Fz",  "F2",  "F4",  "F6",
      "F8",  "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7",  "C5",  "C3",
      "C1",  "Cz",  "C2",  "C4",  "C6",  "T8",  "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4",
      "CP6", "TP8", "P7",  "P5",  "P3",  "P1",  "Pz",  "P2",  "P4",  "P6",  "P8",  "PO7", "PO5",
      "PO3", "POz", "PO4", "PO6", "PO8", "CB1", "O1",  "Oz",  "O2",  "CB2"};
  return names;
}

namespace {

MontageGraph build_from_names(GraphKind kind, const std::vector<std::string>& channels,
                              const std::vector<std::pair<std::string, std::vector<std::string>>>& locals) {
  MontageGraph m;
  m.kind = kind;
  m.channels = channels;
  for (const auto& [name, members] : locals) {
    LocalGraph local;
    local.name = name;
    for (const std::string& ch : members) {
      const int idx = m.channel_index(ch);
      if (idx < 0) throw Error("builtin montage references unknown channel '" + ch + "'");
      local.channels.push_back(idx);
    }
    m.locals.push_back(std::move(local));
  }
  return m;
}

}  // namespace

MontageGraph builtin_graph(GraphKind kind, ChannelSet channel_set) {
  // Memberships follow the 10-20 functional areas; the affective variant
  // replaces the frontal areas with left/right symmetric locals and drops
  // the frontal midline electrode.
  if (channel_set == ChannelSet::Deap32) {
    if (kind == GraphKind::General) {
      return build_from_names(kind, deap32_channels(),
                              {{"Fp", {"Fp1", "Fp2"}},
                               {"AF", {"AF3", "AF4"}},
                               {"F", {"F7", "F3", "Fz", "F4", "F8"}},
                               {"FC", {"FC5", "FC1", "FC2", "FC6"}},
                               {"C", {"C3", "Cz", "C4"}},
                               {"CP", {"CP5", "CP1", "CP2", "CP6"}},
                               {"P", {"P7", "P3", "Pz", "P4", "P8"}},
                               {"PO", {"PO3", "PO4"}},
                               {"O", {"O1", "Oz", "O2"}},
                               {"T-left", {"T7"}},
                               {"T-right", {"T8"}}});
    }
    if (kind == GraphKind::Affective) {
      return build_from_names(kind, deap32_channels(),
                              {{"Fp-left", {"Fp1"}},
                               {"Fp-right", {"Fp2"}},
                               {"AF-left", {"AF3"}},
                               {"AF-right", {"AF4"}},
                               {"F-left", {"F7", "F3"}},
                               {"F-right", {"F4", "F8"}},
                               {"FC", {"FC5", "FC1", "FC2", "FC6"}},
                               {"C", {"C3", "Cz", "C4"}},
                               {"CP", {"CP5", "CP1", "CP2", "CP6"}},
                               {"P", {"P7", "P3", "Pz", "P4", "P8"}},
                               {"PO", {"PO3", "PO4"}},
                               {"O", {"O1", "Oz", "O2"}},
                               {"T", {"T7", "T8"}}});
    }
    if (kind == GraphKind::Hemisphere) {
      return build_from_names(kind, deap32_channels(),
                              {{"Fp-left", {"Fp1"}},
                               {"Fp-right", {"Fp2"}},
                               {"AF-left", {"AF3"}},
                               {"AF-right", {"AF4"}},
                               {"F-left", {"F7", "F3"}},
                               {"F-right", {"F4", "F8"}},
                               {"FC-left", {"FC5", "FC1"}},
                               {"FC-right", {"FC2", "FC6"}},
                               {"C-left", {"C3"}},
                               {"C-right", {"C4"}},
                               {"T-left", {"T7"}},
                               {"T-right", {"T8"}},
                               {"CP-left", {"CP5", "CP1"}},
                               {"CP-right", {"CP2", "CP6"}},
                               {"P-left", {"P7", "P3"}},
                               {"P-right", {"P4", "P8"}},
                               {"PO-left", {"PO3"}},
                               {"PO-right", {"PO4"}},
                               {"O-left", {"O1"}},
                               {"O-right", {"O2"}}});
    }
  }
  if (channel_set == ChannelSet::Std62 && kind == GraphKind::General) {
    return build_from_names(kind, std62_channels(),
                            {{"Fp", {"Fp1", "Fpz", "Fp2"}},
                             {"AF", {"AF3", "AF4"}},
                             {"F", {"F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8"}},
                             {"FC", {"FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8"}},
                             {"C", {"C5", "C3", "C1", "Cz", "C2", "C4", "C6"}},
                             {"CP", {"TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8"}},
                             {"P", {"P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8"}},
                             {"PO", {"PO7", "PO5", "PO3", "POz", "PO4", "PO6", "PO8"}},
                             {"O", {"CB1", "O1", "Oz", "O2", "CB2"}},
                             {"T-left", {"T7"}},
                             {"T-right", {"T8"}}});
  }
  throw ConfigError("unsupported montage combination: " + graph_kind_name(kind) + " on " +
                    (channel_set == ChannelSet::Deap32 ? "deap32" : "std62"));
}

std::string mirror_channel(const std::string& name) {
  std::size_t d = name.size();
  while (d > 0 && std::isdigit(static_cast<unsigned char>(name[d - 1]))) --d;
  if (d == name.size()) return name;  // no trailing digits: Cz, Oz, ...
  const std::string stem = name.substr(0, d);
  const int num = std::stoi(name.substr(d));
  const int mirrored = (num % 2 == 1) ? num + 1 : num - 1;
  return stem + std::to_string(mirrored);
}

bool is_frontal_channel(const std::string& name) {
  // Fp*, AF*, and F<digit>/Fz; FC/FT are central-frontal transition rows.
  if (name.rfind("Fp", 0) == 0 || name.rfind("AF", 0) == 0) return true;
  if (name.size() >= 2 && name[0] == 'F' &&
      (std::isdigit(static_cast<unsigned char>(name[1])) || name[1] == 'z')) {
    return true;
  }
  return false;
}

bool is_midline_channel(const std::string& name) {
  if (name.empty()) return false;
  const char last = name.back();
  return last == 'z' || last == 'Z';
}

std::vector<ValidationIssue> validate(const MontageGraph& montage,
                                      const std::vector<std::string>& dataset_channels) {
  std::vector<ValidationIssue> issues;
  auto flag = [&](const std::string& msg) { issues.push_back(ValidationIssue{msg}); };

  if (!dataset_channels.empty() && montage.channels != dataset_channels) {
    flag("montage channel list does not match the dataset channel list");
  }

  const int c = static_cast<int>(montage.channels.size());
  std::map<int, std::string> owner;
  for (const auto& local : montage.locals) {
    if (local.channels.empty()) flag("local graph '" + local.name + "' is empty");
    std::set<int> in_this;
    for (int ch : local.channels) {
      if (ch < 0 || ch >= c) {
        flag("local graph '" + local.name + "' has channel index out of range");
        continue;
      }
      if (!in_this.insert(ch).second) {
        flag("local graph '" + local.name + "' lists channel '" +
             montage.channels[static_cast<std::size_t>(ch)] + "' twice");
      }
      auto [it, fresh] = owner.emplace(ch, local.name);
      if (!fresh) {
        flag("channel '" + montage.channels[static_cast<std::size_t>(ch)] + "' belongs to both '" +
             it->second + "' and '" + local.name + "'");
      }
    }
  }

  if (montage.kind == GraphKind::Affective) {
    // Frontal midline electrodes must be excluded from every local graph.
    for (const auto& [ch, name] : owner) {
      const std::string& chan = montage.channels[static_cast<std::size_t>(ch)];
      if (is_frontal_channel(chan) && is_midline_channel(chan)) {
        flag("affective montage must exclude frontal midline channel '" + chan + "' (in '" + name + "')");
      }
    }
    // Frontal locals must pair up under the left/right mirror.
    std::vector<std::set<std::string>> frontal_sets;
    for (const auto& local : montage.locals) {
      bool frontal = !local.channels.empty();
      for (int ch : local.channels) {
        frontal = frontal && is_frontal_channel(montage.channels[static_cast<std::size_t>(ch)]);
      }
      if (frontal) {
        std::set<std::string> names;
        for (int ch : local.channels) names.insert(montage.channels[static_cast<std::size_t>(ch)]);
        frontal_sets.push_back(std::move(names));
      }
    }
    for (const auto& s : frontal_sets) {
      std::set<std::string> mirrored;
      for (const std::string& n : s) mirrored.insert(mirror_channel(n));
      if (std::find(frontal_sets.begin(), frontal_sets.end(), mirrored) == frontal_sets.end()) {
        flag("frontal local graph {" + *s.begin() + ", ...} has no mirrored partner");
      }
    }
  }

  return issues;
}

}  // namespace lgg
