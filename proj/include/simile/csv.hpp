#pragma once

#include "simile/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace simile {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::string> comments;  // leading '#' lines, without the '#'
  Matrix values;
};

/// Comma-separated, header row, full-precision floats. `comments` become
/// leading "# ..." lines.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values,
               const std::vector<std::string>& comments = {});
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace simile
