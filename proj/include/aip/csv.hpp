#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "aip/error.hpp"

namespace aip::csv {

// Comma-separated UTF-8 text with a header row. Quoting per RFC 4180
// (double quotes, escaped by doubling). Values are kept as strings;
// callers convert.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::unordered_map<std::string, int> col_index;

  int column(const std::string& name) const {
    auto it = col_index.find(name);
    if (it == col_index.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  }
  bool has_column(const std::string& name) const {
    return col_index.count(name) > 0;
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  t.header = split_line(line);
  for (size_t i = 0; i < t.header.size(); ++i)
    t.col_index.emplace(t.header[i], static_cast<int>(i));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size())
      throw DataError("'" + path + "': row " + std::to_string(t.rows.size() + 2) +
                      " has " + std::to_string(row.size()) + " fields, expected " +
                      std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("cannot parse '" + s + "' as a real number for " + what);
  }
}

inline long to_long(const std::string& s, const std::string& what) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw DataError("cannot parse '" + s + "' as an integer for " + what);
  return v;
}

}  // namespace aip::csv
