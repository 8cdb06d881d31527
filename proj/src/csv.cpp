#include "simile/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace simile {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values,
               const std::vector<std::string>& comments) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != values.cols()) {
    throw std::invalid_argument("write_csv: header/column mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << format_double(values(r, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.size() > 1 && line[1] == ' ' ? line.substr(2) : line.substr(1));
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!have_header) {
      table.header = fields;
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ConfigError(path.string() + ": row with " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(table.header.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto& s = fields[i];
      const char* begin = s.data();
      while (begin < s.data() + s.size() && *begin == ' ') ++begin;
      const auto res = std::from_chars(begin, s.data() + s.size(), row[i]);
      if (res.ec != std::errc()) throw ConfigError(path.string() + ": not a number: '" + s + "'");
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ConfigError(path.string() + ": missing header row");
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

}  // namespace simile
