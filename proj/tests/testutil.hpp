// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-only helpers. The finite-difference checker here is the independent
// oracle for every analytic gradient in the library; it must stay free of
// any tape internals beyond reading values.
#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "mass/tensor.hpp"

namespace masstest {

// Relative error with a floor so near-zero entries compare on an absolute
// scale instead of amplifying finite-difference noise.
inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central finite differences of a scalar function w.r.t. one entry of a
// parameter tensor the function reads through.
inline double central_diff(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double fp = f();
  x = saved - h;
  const double fm = f();
  x = saved;
  return (fp - fm) / (2.0 * h);
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
  std::string worst;
};

// Compare an analytic gradient tensor against central differences for a set
// of entry indices. `param` is the mutable storage `f` recomputes from.
inline GradCheckResult check_entries(const std::function<double()>& f, mass::Tensor& param,
                                     const mass::Tensor& analytic,
                                     const std::vector<int64_t>& entries, double h,
                                     const std::string& name) {
  GradCheckResult r;
  for (int64_t i : entries) {
    double fd = central_diff(f, param.data[static_cast<size_t>(i)], h);
    double e = rel_err(analytic[i], fd);
    ++r.checked;
    if (e > r.max_rel_err) {
      r.max_rel_err = e;
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s[%lld]: analytic=%.10g fd=%.10g rel=%.3g", name.c_str(),
                    static_cast<long long>(i), analytic[i], fd, e);
      r.worst = buf;
    }
  }
  return r;
}

// Pick a small deterministic sample of entry indices: ends plus seeded draws.
inline std::vector<int64_t> sample_entries(int64_t n, int count, mass::Rng& rng) {
  std::vector<int64_t> out;
  out.push_back(0);
  if (n > 1) out.push_back(n - 1);
  while (static_cast<int>(out.size()) < count && static_cast<int64_t>(out.size()) < n) {
    out.push_back(rng.index(n));
  }
  return out;
}

inline std::string temp_dir(const std::string& tag) {
  std::string tmpl = "/tmp/masslab_" + tag + "_XXXXXX";
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  char* p = mkdtemp(buf.data());
  if (!p) throw std::runtime_error("mkdtemp failed");
  return std::string(p);
}

}  // namespace masstest
