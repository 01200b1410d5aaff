#pragma once

// Small text and file helpers shared by the readers and writers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gwbayes {

/// Throws IoError when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);

/// Creates parent directories as needed; throws IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

std::vector<std::string> split_csv_line(std::string_view line);

/// 64-bit FNV-1a, used for configuration fingerprints.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

}  // namespace gwbayes
