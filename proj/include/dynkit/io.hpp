#pragma once

#include "dynkit/core.hpp"

#include <string>
#include <vector>

namespace dynkit {

// 17 significant digits, so doubles round-trip.
std::string fmt_double(double x);

std::string csv_row(const std::vector<double>& values);

// Writes to path + ".tmp" and renames over path.
void write_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace dynkit
