// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Small file and key=value helpers shared by training reports, config files,
// and run manifests.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mass/common.hpp"

namespace mass {

inline bool file_exists(const std::string& path) {
  std::ifstream f(path);
  return f.good();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write file: " + path);
  for (const auto& l : lines) f << l << "\n";
  if (!f) throw InputError("write failed: " + path);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot read file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// key=value pairs, one per line, '#' comments
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  for (const auto& raw : read_lines(path)) {
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line in " + path + ": " + raw);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

struct KvGet {
  const std::map<std::string, std::string>& kv;
  std::string context;

  bool has(const std::string& k) const { return kv.count(k) > 0; }

  std::string str(const std::string& k, const std::string& dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  }
  std::string require(const std::string& k) const {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError(context + ": missing required key " + k);
    return it->second;
  }
  int64_t i64(const std::string& k, int64_t dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stoll(it->second);
  }
  int i(const std::string& k, int dflt) const { return static_cast<int>(i64(k, dflt)); }
  double d(const std::string& k, double dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : std::stod(it->second);
  }
  bool b(const std::string& k, bool dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    return it->second == "1" || it->second == "true" || it->second == "yes";
  }
};

inline std::string basename_of(const std::string& path) {
  size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

inline std::string dirname_of(const std::string& path) {
  size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

}  // namespace mass
