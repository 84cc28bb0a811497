#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace saefin::csv {

/// Line-oriented reader for the engine's comma-separated files. Fields are
/// never quoted; the first line must match the expected header exactly.
class Reader {
 public:
  Reader(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

  /// Advances to the next non-empty row; returns false at end of file.
  bool next();

  const std::vector<std::string>& fields() const { return fields_; }
  const std::string& field(std::size_t i) const { return fields_.at(i); }
  std::size_t line_number() const { return line_no_; }
  const std::filesystem::path& path() const { return path_; }

  long long as_int(std::size_t i) const;
  double as_double(std::size_t i) const;

  /// "<path>:<line>: <msg>" for error reporting.
  std::string where(std::string_view msg) const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::string line_;
  std::vector<std::string> fields_;
  std::size_t width_ = 0;
  std::size_t line_no_ = 0;
};

std::vector<std::string> split(std::string_view line, char sep = ',');

/// Shortest round-trip representation; "nan"/"inf"/"-inf" for non-finite values.
std::string fmt_double(double v);

/// Fixed number of significant digits, for human-facing tables.
std::string fmt_double(double v, int precision);

/// Opens a file for writing and fails loudly.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace saefin::csv
