#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "sbpnet/errors.hpp"

namespace sbpnet {

// Locale-independent, 9 significant digits; "nan" / "inf" / "-inf" for
// non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, end);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
    row_strings(header);
  }

  class Row {
   public:
    explicit Row(CsvWriter& w) : w_(w) {}
    Row(const Row&) = delete;
    ~Row() { w_.out_ << '\n'; }
    Row& operator<<(double v) { return cell(format_number(v)); }
    Row& operator<<(int v) { return cell(std::to_string(v)); }
    Row& operator<<(long v) { return cell(std::to_string(v)); }
    Row& operator<<(std::uint64_t v) { return cell(std::to_string(v)); }
    Row& operator<<(std::string_view s) { return cell(quote(s)); }
    Row& operator<<(const char* s) { return cell(quote(s)); }
    Row& operator<<(const std::string& s) { return cell(quote(s)); }

   private:
    Row& cell(const std::string& s) {
      if (!first_) w_.out_ << ',';
      first_ = false;
      w_.out_ << s;
      return *this;
    }
    CsvWriter& w_;
    bool first_ = true;
  };

  Row row() { return Row(*this); }

 private:
  static std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  void row_strings(const std::vector<std::string>& cells) {
    auto r = row();
    for (const auto& c : cells) r << c;
  }

  std::ofstream out_;
};

// 64-bit FNV-1a, used to fingerprint config files in run manifests.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  auto [end, ec] = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, end);
  return std::string(16 - s.size(), '0') + s;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace sbpnet
