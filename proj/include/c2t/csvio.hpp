#pragma once

// Text output helpers. Doubles are always printed with std::to_chars
// (shortest round-trip form, locale-free) so emitted CSVs are byte-stable
// and reloadable without loss.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "c2t/errors.hpp"

namespace c2t {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
  return read_text_file(a) == read_text_file(b);
}

// Flat key = value manifests. Writable alongside every CLI run and readable
// back for bit-exact replay; the same format CLI11 accepts via --config.
using Manifest = std::map<std::string, std::string>;

inline void write_manifest(const std::filesystem::path& path, const std::string& subcommand,
                           const Manifest& kv) {
  std::ostringstream ss;
  ss << "# c2t manifest\n";
  ss << "subcommand = " << subcommand << "\n";
  for (const auto& [k, v] : kv) ss << k << " = " << v << "\n";
  write_text_file(path, ss.str());
}

inline Manifest read_manifest(const std::filesystem::path& path, std::string* subcommand = nullptr) {
  Manifest kv;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed manifest line: " + line);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "subcommand") {
      if (subcommand) *subcommand = val;
    } else {
      kv[key] = val;
    }
  }
  return kv;
}

inline const std::string& manifest_get(const Manifest& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw DataError("manifest missing key: " + key);
  return it->second;
}

}  // namespace c2t
