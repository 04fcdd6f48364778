#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tng {

std::vector<std::string> split(const std::string& line, char sep);
std::string trim(const std::string& text);

// Strict numeric parsing; `context` names the file/line in error messages.
double parse_double(const std::string& text, const std::string& context);
long parse_long(const std::string& text, const std::string& context);

// Shortest exact decimal form that round-trips a 64-bit real.
std::string format_double(double value);
// Fixed-precision form for human-facing report columns.
std::string format_fixed(double value, int digits);

void warn(const std::string& message);

std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
// Writes to `<path>.tmp` then renames, so failures never leave partial files.
void write_file_atomic(const std::string& path, const std::string& content);

std::uint64_t file_fingerprint(const std::string& path);

}  // namespace tng
