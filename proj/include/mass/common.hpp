// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace mass {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch one type and print the message.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
  using Error::Error;
};
struct IndexError : Error {
  using Error::Error;
};
struct InputError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};

// printf-style std::string helper (no std::format on gcc 11).
inline std::string strf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list args2;
  va_copy(args2, args);
  int n = std::vsnprintf(nullptr, 0, fmt, args);
  va_end(args);
  std::string out(n > 0 ? static_cast<size_t>(n) : 0, '\0');
  if (n > 0) {
    std::vsnprintf(out.data(), out.size() + 1, fmt, args2);
  }
  va_end(args2);
  return out;
}

}  // namespace mass
