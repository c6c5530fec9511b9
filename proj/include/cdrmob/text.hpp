#pragma once

// Delimited-text plumbing shared by every reader and writer.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace cdrmob {

// Fatal input problem (bad tower file, missing path, empty corpus...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits into `out` (reused across calls); fields are trimmed views into `line`.
inline void split_fields(std::string_view line, char delim, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(delim, pos);
    if (next == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      return;
    }
    out.push_back(trim(line.substr(pos, next - pos)));
    pos = next + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline bool iequals(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const char x = (a[k] >= 'A' && a[k] <= 'Z') ? static_cast<char>(a[k] + 32) : a[k];
    const char y = (b[k] >= 'A' && b[k] <= 'Z') ? static_cast<char>(b[k] + 32) : b[k];
    if (x != y) return false;
  }
  return true;
}

// Shortest representation that parses back to the identical double.
inline void append_double(std::string& out, double v) { fmt::format_to(std::back_inserter(out), "{}", v); }

inline std::string format_double(double v) { return fmt::format("{}", v); }

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return in;
}

// Buffered writer that reports failures as DataError.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot open output file: " + path);
    buf_.reserve(1 << 16);
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  ~CsvWriter() {
    try {
      close();
    } catch (...) {
    }
  }

  std::string& buffer() noexcept { return buf_; }

  void line(std::string_view s) {
    buf_.append(s);
    buf_.push_back('\n');
    maybe_flush();
  }

  void maybe_flush() {
    if (buf_.size() >= (1 << 16)) flush();
  }

  void flush() {
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
    if (!out_) throw DataError("write failed: " + path_);
  }

  void close() {
    if (!out_.is_open()) return;
    flush();
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
  std::string buf_;
};

}  // namespace cdrmob
