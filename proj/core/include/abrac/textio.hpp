#pragma once

#include <string>
#include <vector>

namespace abrac {

/// Formats a double with 17 significant digits, enough to round-trip any
/// IEEE-754 double exactly through text.
std::string format_double(double v);

/// Splits one CSV line on commas. No quoting: none of the formats written or
/// read here embed commas in fields.
std::vector<std::string> split_csv_line(const std::string& line);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace abrac
