// Minimal RFC-4180-style CSV reader/writer. The writer formats doubles with
// std::to_chars (shortest round-trip) and writes '\n' endings unconditionally,
// which makes output files byte-deterministic across runs and thread counts.
#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "netdirect/errors.hpp"

namespace netdirect {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws data_error naming the column when absent.
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw data_error("missing required column '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim,
                                               std::size_t line_no) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
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
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delim) {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted)
    throw data_error("line " + std::to_string(line_no) + ": unterminated quoted field");
  out.push_back(field);
  return out;
}

}  // namespace detail

// Reads an entire CSV stream; requires a header row; enforces rectangular shape.
inline CsvTable read_csv(std::istream& in, char delim = ',') {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && line_no > 1) continue;  // ignore trailing blank lines
    auto fields = detail::split_csv_line(line, delim, line_no);
    if (line_no == 1) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw data_error("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(t.header.size()) + " fields, found " +
                         std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw data_error("empty CSV: missing header row");
  return t;
}

inline CsvTable read_csv_file(const std::string& path, char delim = ',') {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open file '" + path + "'");
  return read_csv(f, delim);
}

// Strict full-width numeric parses with row/column context in errors.
inline double csv_to_double(const std::string& s, std::size_t row, const std::string& col) {
  double v{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw data_error("row " + std::to_string(row) + ", column '" + col +
                     "': not a number: '" + s + "'");
  return v;
}

inline long long csv_to_int(const std::string& s, std::size_t row, const std::string& col) {
  long long v{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw data_error("row " + std::to_string(row) + ", column '" + col +
                     "': not an integer: '" + s + "'");
  return v;
}

// Shortest round-trip decimal rendering of a double (deterministic, locale-free).
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw numeric_error("format_double failed");
  return std::string(buf, ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(char delim = ',') : delim_(delim) {}

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ += delim_;
      out_ += quote(fields[i]);
    }
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

  void write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw data_error("cannot write file '" + path + "'");
    f << out_;
  }

 private:
  std::string quote(const std::string& s) const {
    if (s.find_first_of({delim_, '"', '\n', '\r'}) == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    q += '"';
    return q;
  }

  char delim_;
  std::string out_;
};

}  // namespace netdirect
