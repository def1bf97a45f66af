// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Construction of masked seq2seq training instances: contiguous-span
// selection, 80/10/10 encoder corruption, and the compacted decoder with
// preserved positions, plus the Discrete / Feed / DAE variants.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mass/common.hpp"
#include "mass/rng.hpp"
#include "mass/tokenizer.hpp"

namespace mass {

enum class MaskMode { kMass, kDiscrete, kFeed, kDae };

inline const char* mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::kMass: return "MASS";
    case MaskMode::kDiscrete: return "Discrete";
    case MaskMode::kFeed: return "Feed";
    case MaskMode::kDae: return "DAE";
  }
  return "?";
}

inline MaskMode parse_mode(const std::string& s) {
  if (s == "MASS") return MaskMode::kMass;
  if (s == "Discrete") return MaskMode::kDiscrete;
  if (s == "Feed") return MaskMode::kFeed;
  if (s == "DAE") return MaskMode::kDae;
  throw ConfigError("unknown masking mode: " + s);
}

// Inclusive 0-based fragment [u, v].
struct Span {
  int u = 0;
  int v = 0;
  int len() const { return v - u + 1; }
};

struct MaskedExample {
  std::vector<int> encoder_input;      // length m
  std::vector<int> decoder_input;      // length k (or m for Feed/DAE/keep-padding)
  std::vector<int> decoder_positions;  // same length as decoder_input
  std::vector<int> targets;            // same length; kPad marks ignored slots
  Span span;
  int language = 0;
  MaskMode mode = MaskMode::kMass;
  bool keep_padding = false;

  int target_count() const {
    int n = 0;
    for (int t : targets)
      if (t != special::kPad) ++n;
    return n;
  }
};

// Fragment length for a sentence of m tokens: round-half-up of ratio*m,
// clamped to [1, m].
inline int fragment_length(int m, double ratio) {
  int k = static_cast<int>(std::floor(ratio * m + 0.5));
  return std::max(1, std::min(k, m));
}

inline Span span_for_length(int m, int k, Rng& rng) {
  int u = static_cast<int>(rng.index(m - k + 1));
  return Span{u, u + k - 1};
}

inline Span sample_span(int m, double ratio, Rng& rng) {
  if (m < 1) throw InputError("sample_span: sentence length must be >= 1");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InputError("sample_span: ratio must be in (0, 1]");
  return span_for_length(m, fragment_length(m, ratio), rng);
}

struct CorruptPolicy {
  int vocab_size = 0;
  int mask_id = special::kMask;
  int first_normal_id = special::kCount;  // random replacements never hit specials
  double p_mask = 0.8;
  double p_random = 0.1;
};

inline int corrupt_token(int /*orig*/, Rng& rng, const CorruptPolicy& p) {
  double r = rng.uniform();
  if (r < p.p_mask) return p.mask_id;
  if (r < p.p_mask + p.p_random) {
    return p.first_normal_id + static_cast<int>(rng.index(p.vocab_size - p.first_normal_id));
  }
  return -1;  // unchanged
}

// 80/10/10 corruption of the positions in `span`; everything else untouched.
inline std::vector<int> corrupt_encoder(const std::vector<int>& tokens, Span span, Rng& rng,
                                        const CorruptPolicy& policy) {
  if (span.u < 0 || span.v >= static_cast<int>(tokens.size()) || span.u > span.v) {
    throw InputError(strf("corrupt_encoder: span [%d, %d] invalid for %zu tokens", span.u, span.v,
                          tokens.size()));
  }
  std::vector<int> out = tokens;
  for (int i = span.u; i <= span.v; ++i) {
    int c = corrupt_token(tokens[i], rng, policy);
    if (c >= 0) out[i] = c;
  }
  return out;
}

inline std::vector<int> corrupt_positions(const std::vector<int>& tokens,
                                          const std::vector<int>& positions, Rng& rng,
                                          const CorruptPolicy& policy) {
  std::vector<int> out = tokens;
  for (int i : positions) {
    int c = corrupt_token(tokens[i], rng, policy);
    if (c >= 0) out[i] = c;
  }
  return out;
}

namespace detail {

inline MaskedExample build_mass(const std::vector<int>& tokens, Span span, Rng& rng,
                                const CorruptPolicy& policy, bool keep_padding) {
  const int m = static_cast<int>(tokens.size());
  MaskedExample ex;
  ex.mode = MaskMode::kMass;
  ex.span = span;
  ex.keep_padding = keep_padding;
  ex.encoder_input = corrupt_encoder(tokens, span, rng, policy);
  if (!keep_padding) {
    // compacted decoder: k slots at the fragment's original positions; the
    // first input acts as fragment-BOS and is the mask symbol
    for (int i = span.u; i <= span.v; ++i) {
      ex.decoder_input.push_back(i == span.u ? policy.mask_id : tokens[i - 1]);
      ex.decoder_positions.push_back(i);
      ex.targets.push_back(tokens[i]);
    }
  } else {
    // full-length decoder: mask symbol everywhere outside the shifted
    // fragment, ignore-id targets outside the fragment
    for (int i = 0; i < m; ++i) {
      bool in_shifted = i > span.u && i <= span.v;
      ex.decoder_input.push_back(in_shifted ? tokens[i - 1] : policy.mask_id);
      ex.decoder_positions.push_back(i);
      ex.targets.push_back(i >= span.u && i <= span.v ? tokens[i] : special::kPad);
    }
  }
  return ex;
}

inline MaskedExample build_discrete(const std::vector<int>& tokens, Span span, Rng& rng,
                                    const CorruptPolicy& policy) {
  const int m = static_cast<int>(tokens.size());
  const int k = span.len();
  MaskedExample ex;
  ex.mode = MaskMode::kDiscrete;
  ex.span = span;
  // k scattered distinct positions, predicted in left-to-right order with a
  // compacted decoder mirroring the MASS layout
  std::vector<int> positions = rng.sample_distinct(m, k);
  ex.encoder_input = corrupt_positions(tokens, positions, rng, policy);
  for (size_t i = 0; i < positions.size(); ++i) {
    ex.decoder_input.push_back(i == 0 ? policy.mask_id : tokens[positions[i - 1]]);
    ex.decoder_positions.push_back(positions[i]);
    ex.targets.push_back(tokens[positions[i]]);
  }
  return ex;
}

inline MaskedExample build_feed(const std::vector<int>& tokens, Span span, Rng& rng,
                                const CorruptPolicy& policy) {
  const int m = static_cast<int>(tokens.size());
  MaskedExample ex;
  ex.mode = MaskMode::kFeed;
  ex.span = span;
  ex.encoder_input = corrupt_encoder(tokens, span, rng, policy);
  // decoder sees the whole sentence shifted right by BOS; only fragment
  // positions carry live targets
  for (int i = 0; i < m; ++i) {
    ex.decoder_input.push_back(i == 0 ? special::kBos : tokens[i - 1]);
    ex.decoder_positions.push_back(i);
    ex.targets.push_back(i >= span.u && i <= span.v ? tokens[i] : special::kPad);
  }
  return ex;
}

inline MaskedExample build_dae(const std::vector<int>& tokens, Rng& rng,
                               const CorruptPolicy& policy, bool swap_noise) {
  const int m = static_cast<int>(tokens.size());
  MaskedExample ex;
  ex.mode = MaskMode::kDae;
  ex.span = Span{0, m - 1};
  // noised copy: drop 0.1 / mask 0.1 / keep 0.8 per token
  for (int tok : tokens) {
    double r = rng.uniform();
    if (r < 0.1) continue;
    ex.encoder_input.push_back(r < 0.2 ? policy.mask_id : tok);
  }
  if (ex.encoder_input.empty()) ex.encoder_input.push_back(policy.mask_id);
  if (swap_noise) {
    for (size_t i = 0; i + 1 < ex.encoder_input.size(); i += 2) {
      if (rng.uniform() < 0.1) std::swap(ex.encoder_input[i], ex.encoder_input[i + 1]);
    }
  }
  for (int i = 0; i < m; ++i) {
    ex.decoder_input.push_back(i == 0 ? special::kBos : tokens[i - 1]);
    ex.decoder_positions.push_back(i);
    ex.targets.push_back(tokens[i]);
  }
  return ex;
}

}  // namespace detail

// One training instance from a raw token sequence. The span argument is
// ignored for DAE and supplies only the count k for Discrete.
inline MaskedExample build_example(const std::vector<int>& tokens, Span span, Rng& rng,
                                   MaskMode mode, const CorruptPolicy& policy,
                                   bool keep_padding = false, bool dae_swap_noise = false) {
  if (tokens.empty()) throw InputError("build_example: empty token sequence");
  if (span.u < 0 || span.v >= static_cast<int>(tokens.size()) || span.u > span.v) {
    throw InputError(strf("build_example: span [%d, %d] invalid for %zu tokens", span.u, span.v,
                          tokens.size()));
  }
  switch (mode) {
    case MaskMode::kMass:
      return detail::build_mass(tokens, span, rng, policy, keep_padding);
    case MaskMode::kDiscrete:
      return detail::build_discrete(tokens, span, rng, policy);
    case MaskMode::kFeed:
      return detail::build_feed(tokens, span, rng, policy);
    case MaskMode::kDae:
      return detail::build_dae(tokens, rng, policy, dae_swap_noise);
  }
  throw ConfigError("build_example: unknown mode");
}

// Line format for example dumps: mode, language, span, then the id lists.
inline std::string example_record(const MaskedExample& ex) {
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(v[i]);
    }
    return s;
  };
  return strf("mode=%s lang=%d span=%d:%d enc=%s dec=%s pos=%s tgt=%s", mode_name(ex.mode),
              ex.language, ex.span.u, ex.span.v, join(ex.encoder_input).c_str(),
              join(ex.decoder_input).c_str(), join(ex.decoder_positions).c_str(),
              join(ex.targets).c_str());
}

}  // namespace mass
