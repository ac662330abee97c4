#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace isolex {

/// Fixed-point rendering, e.g. format_fixed(3.90456, 3) == "3.905".
std::string format_fixed(double value, int decimals);

/// Shortest round-trip rendering of a double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Runs fn(0..n-1) on up to `workers` threads. The lowest-index exception, if
/// any, is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace isolex
