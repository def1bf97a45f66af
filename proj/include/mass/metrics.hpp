// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Corpus-level BLEU (modified n-gram precision with brevity penalty, no
// smoothing by default) and perplexity.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mass/tokenizer.hpp"
#include "mass/training.hpp"

namespace mass {

namespace detail {

// n-gram key: tokens joined by \x01 (tokens are whitespace-split words,
// so the separator cannot collide)
inline std::map<std::string, int64_t> ngram_counts(const std::vector<std::string>& words, int n) {
  std::map<std::string, int64_t> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= words.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key += '\x01';
      key += words[i + static_cast<size_t>(j)];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

// Corpus BLEU over pre-tokenized word sequences, one reference per
// hypothesis. Any zero n-gram precision zeroes the score unless add-one
// smoothing is requested.
inline double bleu(const std::vector<std::vector<std::string>>& hyps,
                   const std::vector<std::vector<std::string>>& refs, int max_n = 4,
                   bool smooth = false) {
  if (hyps.empty()) throw InputError("bleu: empty hypothesis set");
  if (hyps.size() != refs.size()) {
    throw InputError(strf("bleu: %zu hypotheses vs %zu references", hyps.size(), refs.size()));
  }
  for (const auto& r : refs) {
    if (r.empty()) throw InputError("bleu: empty reference");
  }
  int64_t hyp_len = 0, ref_len = 0;
  std::vector<int64_t> clipped(static_cast<size_t>(max_n), 0);
  std::vector<int64_t> total(static_cast<size_t>(max_n), 0);
  for (size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += static_cast<int64_t>(hyps[i].size());
    ref_len += static_cast<int64_t>(refs[i].size());
    for (int n = 1; n <= max_n; ++n) {
      auto hc = detail::ngram_counts(hyps[i], n);
      auto rc = detail::ngram_counts(refs[i], n);
      for (const auto& [key, cnt] : hc) {
        total[static_cast<size_t>(n - 1)] += cnt;
        auto it = rc.find(key);
        if (it != rc.end()) {
          clipped[static_cast<size_t>(n - 1)] += std::min(cnt, it->second);
        }
      }
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_prec = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    int64_t c = clipped[static_cast<size_t>(n - 1)];
    int64_t t = total[static_cast<size_t>(n - 1)];
    double p;
    if (smooth && n > 1) {
      p = static_cast<double>(c + 1) / static_cast<double>(t + 1);
    } else {
      if (c == 0 || t == 0) return 0.0;
      p = static_cast<double>(c) / static_cast<double>(t);
    }
    log_prec += std::log(p);
  }
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_prec / max_n);
}

inline std::vector<std::string> bleu_words(const std::string& line) {
  return detail::split_ws(line);
}

// BLEU on raw text lines: decoded (word-level) text, whitespace-split.
inline double bleu_lines(const std::vector<std::string>& hyp_lines,
                         const std::vector<std::string>& ref_lines, int max_n = 4,
                         bool smooth = false) {
  std::vector<std::vector<std::string>> h, r;
  h.reserve(hyp_lines.size());
  r.reserve(ref_lines.size());
  for (const auto& l : hyp_lines) h.push_back(bleu_words(l));
  for (const auto& l : ref_lines) r.push_back(bleu_words(l));
  return bleu(h, r, max_n, smooth);
}

// exp(mean per-token NLL) under the masking mode's target definition
inline double perplexity(ModelParams& params, const std::vector<TokenizedCorpus>& corpora,
                         const TrainConfig& cfg) {
  return eval_ppl(params, corpora, cfg);
}

}  // namespace mass
