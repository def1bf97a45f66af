// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file layout:
//   "MASSCKPT1\n"
//   key=value config lines
//   "end_config\n"
//   per parameter, in declared order:
//     "blob <name> <ndim> <d0> [<d1> ...]\n"
//     <numel * 8 bytes of little-endian float64>
// Round trips are bit-exact.
#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mass/common.hpp"
#include "mass/model.hpp"

namespace mass {

constexpr const char* kCheckpointMagic = "MASSCKPT1";

namespace detail {

inline void write_f64_le(std::ostream& os, const std::vector<double>& data) {
  static_assert(sizeof(double) == 8);
  // host is little-endian on every supported target
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
}

inline void read_f64_le(std::istream& is, std::vector<double>& data) {
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!is) throw InputError("checkpoint: truncated parameter blob");
}

}  // namespace detail

inline std::string config_to_kv(const ModelConfig& c) {
  std::string s;
  s += strf("layers=%d\n", c.layers);
  s += strf("model_dim=%d\n", c.model_dim);
  s += strf("heads=%d\n", c.heads);
  s += strf("ffn_dim=%d\n", c.ffn_dim);
  s += strf("vocab_size=%d\n", c.vocab_size);
  s += strf("max_positions=%d\n", c.max_positions);
  s += strf("num_languages=%d\n", c.num_languages);
  s += strf("dropout=%.17g\n", c.dropout);
  s += strf("learned_positions=%d\n", c.learned_positions ? 1 : 0);
  s += strf("tie_embeddings=%d\n", c.tie_embeddings ? 1 : 0);
  return s;
}

inline ModelConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  auto geti = [&](const char* k, int& out) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError(std::string("checkpoint: missing config key ") + k);
    out = std::stoi(it->second);
  };
  geti("layers", c.layers);
  geti("model_dim", c.model_dim);
  geti("heads", c.heads);
  geti("ffn_dim", c.ffn_dim);
  geti("vocab_size", c.vocab_size);
  geti("max_positions", c.max_positions);
  geti("num_languages", c.num_languages);
  auto it = kv.find("dropout");
  if (it == kv.end()) throw ConfigError("checkpoint: missing config key dropout");
  c.dropout = std::stod(it->second);
  int flag = 0;
  geti("learned_positions", flag);
  c.learned_positions = flag != 0;
  geti("tie_embeddings", flag);
  c.tie_embeddings = flag != 0;
  return c;
}

// `extra` rides along as additional config lines (e.g. the manifest name);
// keys must be deterministic for bit-identical reruns.
inline void save_checkpoint(const std::string& path, ModelParams& params,
                            const std::map<std::string, std::string>& extra = {}) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write checkpoint: " + path);
  os << kCheckpointMagic << "\n";
  os << config_to_kv(params.cfg);
  for (const auto& [k, v] : extra) os << k << "=" << v << "\n";
  os << "end_config\n";
  params.for_each([&](const std::string& name, Tensor& t) {
    os << "blob " << name << " " << t.rank();
    for (int d : t.shape) os << " " << d;
    os << "\n";
    detail::write_f64_le(os, t.data);
  });
  if (!os) throw InputError("checkpoint write failed: " + path);
}

struct Checkpoint {
  ModelParams params;
  std::map<std::string, std::string> extra;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read checkpoint: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic) {
    throw InputError("not a checkpoint file (bad magic): " + path);
  }
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    if (line == "end_config") break;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw InputError("checkpoint: malformed config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  Checkpoint ck;
  // allocate via the declared structure, then fill blobs in the same order
  ck.params = init_params(config_from_kv(kv), 0);
  static const char* known[] = {"layers",        "model_dim",     "heads",
                                "ffn_dim",       "vocab_size",    "max_positions",
                                "num_languages", "dropout",       "learned_positions",
                                "tie_embeddings"};
  for (const auto& [k, v] : kv) {
    bool is_known = false;
    for (const char* n : known) is_known = is_known || k == n;
    if (!is_known) ck.extra[k] = v;
  }
  ck.params.for_each([&](const std::string& name, Tensor& t) {
    if (!std::getline(is, line)) throw InputError("checkpoint: missing blob for " + name);
    std::istringstream hs(line);
    std::string tag, bname;
    int ndim = 0;
    hs >> tag >> bname >> ndim;
    if (tag != "blob" || bname != name) {
      throw InputError("checkpoint: expected blob " + name + ", found: " + line);
    }
    Shape shape(static_cast<size_t>(ndim));
    for (int i = 0; i < ndim; ++i) hs >> shape[static_cast<size_t>(i)];
    if (!hs) throw InputError("checkpoint: malformed blob header: " + line);
    if (shape != t.shape) {
      throw InputError("checkpoint: blob " + name + " has shape " + shape_str(shape) +
                       ", expected " + shape_str(t.shape));
    }
    detail::read_f64_le(is, t.data);
  });
  return ck;
}

}  // namespace mass
