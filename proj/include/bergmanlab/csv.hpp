#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace bergman {

/// RFC-4180 CSV writer; floats at 17 significant digits ('.' decimal) so the
/// values round-trip losslessly.
class CsvWriter {
 public:
  using Cell = std::variant<std::string, double, long long>;

  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<Cell> row) {
    if (row.size() != header_.size()) throw std::invalid_argument("CsvWriter: row width mismatch");
    rows_.push_back(std::move(row));
  }

  std::string str() const {
    std::ostringstream os;
    emit_line(os, header_);
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << cell_str(row[i]);
      }
      os << "\r\n";
    }
    return os.str();
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("CsvWriter: cannot open " + path);
    f << str();
  }

 private:
  static void emit_line(std::ostringstream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << quote(cells[i]);
    }
    os << "\r\n";
  }
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
    return out;
  }
  static std::string cell_str(const Cell& c) {
    if (std::holds_alternative<std::string>(c)) return quote(std::get<std::string>(c));
    if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(c));
    return buf;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace bergman
