#pragma once

#include <string>
#include <vector>

namespace iteach {

std::string sha256_hex(const std::string& data);

// Shortest round-trip decimal form.
std::string format_double(double v);

std::vector<std::string> split(const std::string& s, char sep);

}  // namespace iteach
