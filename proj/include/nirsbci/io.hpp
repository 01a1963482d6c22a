#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace nirsbci::io {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
// Fixed-point display value, e.g. format_fixed(64.0833, 1) == "64.1".
std::string format_fixed(double value, int decimals);

std::vector<std::string> split(std::string_view line, char sep);
std::string trim(std::string_view text);
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

struct CsvTable {
  std::vector<std::string> comments;  // lines starting with '#', without the marker
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;  // -1 when absent
};

// Comma-separated, header row first; '#' lines are collected as comments.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

// Write via a sibling temp file and rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace nirsbci::io
