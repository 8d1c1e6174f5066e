#pragma once

#include <filesystem>
#include <string>

namespace iteach {

// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace iteach
