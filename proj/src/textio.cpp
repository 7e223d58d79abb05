#include "samgpt/textio.hpp"

#include <charconv>

#include "samgpt/error.hpp"

namespace samgpt {

LineReader::LineReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw LoadError(path.string() + ": missing file");
}

std::optional<std::string_view> LineReader::next() {
  while (std::getline(in_, buffer_)) {
    ++line_no_;
    std::string_view v(buffer_);
    while (!v.empty() && (v.back() == '\r' || v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
    if (v.empty() || v.front() == '#') continue;
    return v;
  }
  return std::nullopt;
}

void LineReader::fail(const std::string& message) const {
  throw LoadError(path_.string() + ":" + std::to_string(line_no_) + ": " + message);
}

long long LineReader::parse_int(std::string_view field) const {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    fail("not an integer: '" + std::string(field) + "'");
  return value;
}

double LineReader::parse_double(std::string_view field) const {
  double value = 0;
  const char* first = field.data();
  if (!field.empty() && field.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    fail("not a number: '" + std::string(field) + "'");
  return value;
}

void split_fields(std::string_view line, char sep, std::vector<std::string_view>& out) {
  out.clear();
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  };
  line = trim(line);
  if (line.empty()) return;
  if (sep == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) out.push_back(line.substr(i, j - i));
      i = j;
    }
    return;
  }
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
}

void append_double(std::string& out, double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, ptr);
}

}  // namespace samgpt
