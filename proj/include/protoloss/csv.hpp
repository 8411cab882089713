#pragma once

// Small CSV helpers shared by every artifact writer/reader. Numbers are
// written with 17 significant digits so a write/read cycle is exact.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace protoloss::csv {

std::string format_double(double value);

std::vector<std::string> split_line(std::string_view line);

// Parses a whole cell as a finite or non-finite double; throws ParseError
// mentioning `line_number` on failure.
double parse_double(std::string_view cell, std::size_t line_number,
                    const std::filesystem::path& path);
std::size_t parse_index(std::string_view cell, std::size_t line_number,
                        const std::filesystem::path& path);

struct Table {
  std::vector<std::string> header;
  // Each row keeps its 1-based line number for error messages.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

Table read(const std::filesystem::path& path, bool has_header = true);

// Writes `text` to `path`, throwing IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace protoloss::csv
