#pragma once

#include <string>

#include "lgg/train.hpp"

namespace lgg {

// Plain structured text, full float precision; byte-stable for identical
// runs so reports can be diffed directly.
std::string serialize_report(const CVReport& report);
void write_report(const CVReport& report, const std::string& path);

}  // namespace lgg
