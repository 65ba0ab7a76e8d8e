#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nmsim::io {

// Round-trip-safe decimal formatting used for every number we persist.
std::string format_g17(double v);

std::string read_text_file(const std::filesystem::path& path);

// Writes to <path>.tmp and renames, so a failed run never leaves a partial file.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace nmsim::io
