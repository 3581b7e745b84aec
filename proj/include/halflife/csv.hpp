#pragma once

// Minimal RFC 4180 CSV reader/writer plus atomic file output.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "halflife/error.hpp"

namespace halflife::csv {

using Row = std::vector<std::string>;

inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        field.clear();
        row.clear();
        field_started = false;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ValidationError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
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

inline void append_row(std::string& out, const Row& row) {
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(row[i]);
  }
  out.push_back('\n');
}

inline std::string format(const Row& header, const std::vector<Row>& rows) {
  std::string out;
  append_row(out, header);
  for (const auto& r : rows) append_row(out, r);
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary file, then renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// A parsed CSV file with named-column access.
class Table {
 public:
  Table() = default;

  static Table from_text(std::string_view text, std::string name = "csv") {
    Table t;
    t.name_ = std::move(name);
    auto rows = parse(text);
    if (rows.empty()) throw ValidationError(t.name_ + ": missing header row");
    t.header_ = std::move(rows.front());
    for (size_t i = 0; i < t.header_.size(); ++i) t.index_[t.header_[i]] = i;
    for (size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != t.header_.size()) {
        throw ValidationError(t.name_ + ": row " + std::to_string(r + 1) + " has " +
                              std::to_string(rows[r].size()) + " fields, expected " +
                              std::to_string(t.header_.size()));
      }
      t.rows_.push_back(std::move(rows[r]));
    }
    return t;
  }

  static Table load(const std::filesystem::path& path) {
    return from_text(read_file(path), path.string());
  }

  /// Throws naming the first missing column.
  void require(std::initializer_list<std::string_view> columns) const {
    for (auto c : columns) {
      if (!index_.count(std::string(c))) {
        throw ValidationError(name_ + ": missing required column '" + std::string(c) + "'");
      }
    }
  }

  bool has(std::string_view column) const { return index_.count(std::string(column)) > 0; }
  size_t column(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ValidationError(name_ + ": missing required column '" + std::string(name) + "'");
    return it->second;
  }

  size_t size() const { return rows_.size(); }
  const Row& row(size_t i) const { return rows_[i]; }
  const std::string& at(size_t r, std::string_view col) const { return rows_[r][column(col)]; }
  const Row& header() const { return header_; }
  const std::string& name() const { return name_; }

  template <class T>
  T number(size_t r, std::string_view col) const {
    const auto& s = at(r, col);
    T value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ValidationError(name_ + ": row " + std::to_string(r + 2) + ", column '" + std::string(col) +
                            "': cannot parse '" + s + "'");
    }
    return value;
  }

 private:
  std::string name_;
  Row header_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<Row> rows_;
};

inline std::string fmt_double(double v, int precision = 10) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

}  // namespace halflife::csv
