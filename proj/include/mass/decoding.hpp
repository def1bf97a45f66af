// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Greedy and beam-search generation. Hypotheses are compared by
// length-normalized log-probability; finished means EOS emitted or the
// length cap hit.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mass/model.hpp"

namespace mass {

struct Hypothesis {
  std::vector<int> ids;  // generated tokens, EOS included when emitted
  double logprob = 0.0;
  bool finished = false;

  double norm_score(double length_penalty = 1.0) const {
    if (ids.empty()) return -std::numeric_limits<double>::infinity();
    return logprob / std::pow(static_cast<double>(ids.size()), length_penalty);
  }
};

namespace detail {

inline std::vector<double> log_softmax_row(const Tensor& logits, int row) {
  int V = logits.cols();
  double mx = logits.at(row, 0);
  for (int j = 1; j < V; ++j) mx = std::max(mx, logits.at(row, j));
  double z = 0.0;
  for (int j = 0; j < V; ++j) z += std::exp(logits.at(row, j) - mx);
  double lse = mx + std::log(z);
  std::vector<double> out(static_cast<size_t>(V));
  for (int j = 0; j < V; ++j) out[static_cast<size_t>(j)] = logits.at(row, j) - lse;
  return out;
}

// Log-probs over the next token given the generated prefix. The encoder ran
// once; its memory value re-enters each step as a constant.
inline std::vector<double> next_token_logprobs(ModelParams& params, const Tensor& memory,
                                               const std::vector<int>& prefix, int tgt_lang,
                                               int bos_id) {
  std::vector<int> dec_in;
  dec_in.push_back(bos_id);
  dec_in.insert(dec_in.end(), prefix.begin(), prefix.end());
  std::vector<int> pos(dec_in.size());
  for (size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  Tape t;
  TransformerRun run(t, params);
  Var logits = run.decode(dec_in, pos, t.constant(memory), tgt_lang);
  return log_softmax_row(t.value(logits), static_cast<int>(dec_in.size()) - 1);
}

// smaller-ids-first comparison for deterministic tie-breaking
inline bool ids_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

inline Tensor encode_memory(ModelParams& params, const std::vector<int>& src, int src_lang) {
  Tape t;
  TransformerRun run(t, params);
  return t.value(run.encode(src, src_lang));
}

// Stepwise argmax from BOS until EOS or max_len tokens. Ties resolve to the
// smallest token id.
inline Hypothesis greedy_decode(ModelParams& params, const std::vector<int>& src, int src_lang,
                                int tgt_lang, int max_len, int bos_id = special::kBos,
                                int eos_id = special::kEos) {
  Hypothesis hyp;
  if (max_len <= 0) {
    hyp.finished = true;
    return hyp;
  }
  Tensor memory = encode_memory(params, src, src_lang);
  while (static_cast<int>(hyp.ids.size()) < max_len) {
    auto lp = detail::next_token_logprobs(params, memory, hyp.ids, tgt_lang, bos_id);
    int best = 0;
    for (int j = 1; j < static_cast<int>(lp.size()); ++j) {
      if (lp[static_cast<size_t>(j)] > lp[static_cast<size_t>(best)]) best = j;
    }
    hyp.ids.push_back(best);
    hyp.logprob += lp[static_cast<size_t>(best)];
    if (best == eos_id) break;
  }
  hyp.finished = true;
  return hyp;
}

// Standard beam search: every live hypothesis expands its top min(beam, V)
// tokens, the pool keeps the best `beam` by cumulative log-probability, and
// finished hypotheses compete by length-normalized score.
inline Hypothesis beam_decode(ModelParams& params, const std::vector<int>& src, int src_lang,
                              int tgt_lang, int beam, int max_len, double length_penalty = 1.0,
                              int bos_id = special::kBos, int eos_id = special::kEos) {
  if (beam < 1) throw InputError("beam_decode: beam must be >= 1");
  Hypothesis empty;
  empty.finished = true;
  if (max_len <= 0) return empty;

  Tensor memory = encode_memory(params, src, src_lang);
  std::vector<Hypothesis> live(1);
  bool have_best = false;
  Hypothesis best;

  auto offer_finished = [&](Hypothesis h) {
    h.finished = true;
    double s = h.norm_score(length_penalty);
    double bs = best.norm_score(length_penalty);
    if (!have_best || s > bs || (s == bs && detail::ids_less(h.ids, best.ids))) {
      best = std::move(h);
      have_best = true;
    }
  };

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& hyp : live) {
      auto lp = detail::next_token_logprobs(params, memory, hyp.ids, tgt_lang, bos_id);
      int V = static_cast<int>(lp.size());
      int take = std::min(beam, V);
      std::vector<int> order(static_cast<size_t>(V));
      for (int j = 0; j < V; ++j) order[static_cast<size_t>(j)] = j;
      std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](int a, int b) {
        if (lp[static_cast<size_t>(a)] != lp[static_cast<size_t>(b)]) {
          return lp[static_cast<size_t>(a)] > lp[static_cast<size_t>(b)];
        }
        return a < b;
      });
      for (int r = 0; r < take; ++r) {
        int tok = order[static_cast<size_t>(r)];
        Hypothesis next = hyp;
        next.ids.push_back(tok);
        next.logprob += lp[static_cast<size_t>(tok)];
        candidates.push_back(std::move(next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Hypothesis& a,
                                                              const Hypothesis& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return detail::ids_less(a.ids, b.ids);
    });
    if (static_cast<int>(candidates.size()) > beam) candidates.resize(static_cast<size_t>(beam));
    live.clear();
    for (auto& c : candidates) {
      if (c.ids.back() == eos_id || static_cast<int>(c.ids.size()) >= max_len) {
        offer_finished(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }
  }
  for (auto& h : live) offer_finished(std::move(h));
  if (!have_best) return empty;
  return best;
}

}  // namespace mass
