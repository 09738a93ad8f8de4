#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tiledrop {

// RFC-4180 field quoting: quotes only when needed, doubles embedded quotes.
std::string csv_field(const std::string& s);

// Shortest text that round-trips to the same double.
std::string format_double(double v);

// Joins already-formatted fields into one CRLF-terminated record.
std::string csv_row(const std::vector<std::string>& fields);

// Writes bytes verbatim (binary mode, truncating). Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace tiledrop
