#pragma once

// Small helpers shared by the delimited-text readers and writers.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace mixtrack::textio {

std::string_view trim(std::string_view s);

/// Splits on a single delimiter character; empty fields are kept.
std::vector<std::string_view> split(std::string_view s, char delim);

/// Strict full-field conversions. Return false on any trailing junk,
/// empty input, or a non-finite real.
bool parse_real(std::string_view s, double& out);
bool parse_int(std::string_view s, std::int64_t& out);

/// Shortest text that reads back to the identical double.
std::string format_exact(double v);

/// Six significant digits, locale independent. NaN prints as "NA".
std::string format_report(double v);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace mixtrack::textio
