#pragma once

// Minimal RFC-4180 style CSV reading and writing used by every stage.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prokwo/error.hpp"

namespace prokwo::csv {

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "NaN";
  if (value == 0.0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

inline std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string();
}

class Table {
 public:
  Table() = default;
  Table(std::string source, std::vector<std::string> header, std::vector<std::vector<std::string>> rows)
      : source_(std::move(source)), header_(std::move(header)), rows_(std::move(rows)) {
    for (std::size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], i);
  }

  const std::string& source() const { return source_; }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  bool has_column(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError(source_ + ": missing column '" + name + "'");
    return it->second;
  }

  const std::string& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline Table read(std::istream& in, const std::string& source) {
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (header.empty()) {
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header.size()) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  if (header.empty()) throw DataError(source + ": empty CSV file");
  return Table(source, std::move(header), std::move(rows));
}

inline Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  return read(in, path.string());
}

inline long parse_integer(const std::string& text, const std::string& where) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(where + ": expected an integer, found '" + text + "'");
  }
  return value;
}

inline std::optional<double> parse_optional_double(const std::string& text, const std::string& where) {
  if (text.empty() || text == "NA") return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(where + ": expected a number, found '" + text + "'");
  }
  return value;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((write_field(fields, first)), ...);
    out_ << '\n';
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << escape(fields[i]);
    }
    out_ << '\n';
  }

 private:
  template <typename T>
  void write_field(const T& value, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_same_v<T, double>) {
      out_ << format_double(value);
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      out_ << format_optional(value);
    } else if constexpr (std::is_same_v<T, bool>) {
      out_ << (value ? '1' : '0');
    } else if constexpr (std::is_arithmetic_v<T>) {
      out_ << value;
    } else {
      out_ << escape(std::string_view(value));
    }
  }

  std::ostream& out_;
};

}  // namespace prokwo::csv
