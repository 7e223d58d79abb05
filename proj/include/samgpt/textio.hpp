#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace samgpt {

/// Line-oriented reader that reports parse failures as LoadError with
/// "file:line" context. Blank lines and lines starting with '#' are skipped.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);

  std::optional<std::string_view> next();
  std::size_t line_number() const { return line_no_; }

  [[noreturn]] void fail(const std::string& message) const;

  long long parse_int(std::string_view field) const;
  double parse_double(std::string_view field) const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::string buffer_;
  std::size_t line_no_ = 0;
};

/// Split on `sep`; when sep is ' ' any run of spaces/tabs separates. Trailing
/// '\r' and surrounding whitespace are trimmed from each field.
void split_fields(std::string_view line, char sep, std::vector<std::string_view>& out);

/// Shortest decimal form that parses back to the same double.
void append_double(std::string& out, double x);

}  // namespace samgpt
