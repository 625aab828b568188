#include "lgg/report.hpp"

#include <fstream>
#include <sstream>

#include "lgg/errors.hpp"

namespace lgg {

namespace {
std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

std::string serialize_report(const CVReport& report) {
  std::ostringstream os;
  os << "lgg-cv-report v1\n";
  os << "dimension: " << report.dimension << "\n";
  os << "seed: " << report.seed << "\n";
  os << "folds: " << report.fold_accuracy.size() << "\n";

  os << "fold_accuracy:";
  for (double a : report.fold_accuracy) os << " " << fmt(a);
  os << "\n";

  os << "fold_best_inner:";
  for (int i : report.fold_best_inner) os << " " << i;
  os << "\n";

  os << "fold_best_val:";
  for (double a : report.fold_best_val) os << " " << fmt(a);
  os << "\n";

  os << "fold_stage2_warn:";
  for (bool w : report.fold_stage2_warn) os << " " << (w ? 1 : 0);
  os << "\n";

  os << "mean_accuracy: " << fmt(report.mean_accuracy) << "\n";
  os << "std_accuracy: " << fmt(report.std_accuracy) << "\n";
  for (const std::string& note : report.notes) os << "note: " << note << "\n";

  os << "config:\n";
  std::istringstream cfg(report.config_snapshot);
  std::string line;
  while (std::getline(cfg, line)) os << "  " << line << "\n";
  return os.str();
}

void write_report(const CVReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open report file for writing: " + path);
  const std::string text = serialize_report(report);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw DataError("failed writing report: " + path);
}

}  // namespace lgg
