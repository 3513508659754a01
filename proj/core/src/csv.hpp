#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "gazeauth/error.hpp"

namespace gazeauth::detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

// Line-oriented CSV reader that checks the header and reports file:line on
// malformed rows.
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, std::string_view expected_header)
      : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open '" + path.string() + "'");
    std::string header;
    if (!std::getline(in_, header)) fail("missing header");
    strip_cr(header);
    if (header != expected_header) fail("unexpected header '" + header + "'");
    line_no_ = 1;
  }

  // Returns false at end of file. Blank lines are skipped.
  bool next(std::vector<std::string_view>& fields, std::size_t expected_count) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      strip_cr(line_);
      if (line_.empty()) continue;
      fields = split_csv_line(line_);
      if (fields.size() != expected_count) {
        fail("expected " + std::to_string(expected_count) + " fields, got " +
             std::to_string(fields.size()));
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(path_.string() + ":" + std::to_string(line_no_ + (line_no_ == 0)) +
                          ": " + what);
  }

  std::size_t line_number() const { return line_no_; }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::string line_;
  std::size_t line_no_ = 0;
};

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

inline void check_stream(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace gazeauth::detail
