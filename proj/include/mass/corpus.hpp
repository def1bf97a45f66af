// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Corpus ingestion (tokenize + length filter) and the bundled synthetic
// corpus generator, so the full pipeline runs without downloads.
#pragma once

#include <string>
#include <vector>

#include "mass/io.hpp"
#include "mass/rng.hpp"
#include "mass/tokenizer.hpp"

namespace mass {

struct TokenizedCorpus {
  std::vector<std::vector<int>> sentences;
  int language = 0;
  int64_t dropped_overlength = 0;
};

// Sentences whose post-BPE token count exceeds `length_cap` are dropped at
// ingestion, mirroring the pre-training length filter.
inline TokenizedCorpus tokenize_corpus(Bpe& bpe, const std::vector<std::string>& lines,
                                       int length_cap, int language) {
  TokenizedCorpus c;
  c.language = language;
  for (const auto& line : lines) {
    auto ids = bpe.encode(line);
    if (ids.empty()) continue;
    if (static_cast<int>(ids.size()) > length_cap) {
      ++c.dropped_overlength;
      continue;
    }
    c.sentences.push_back(std::move(ids));
  }
  return c;
}

// ---------------------------------------------------------------------------
// synthetic corpus

namespace toywords {

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {"varel", "domik", "selun", "porat", "minda", "kovel",
                                             "tarn",  "bilu",  "resk",  "onda",  "fyrel", "gomas",
                                             "helit", "juno",  "lopra", "wesk"};
  return v;
}
inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"brems", "calit", "dovers", "fintas", "garno",
                                             "hupet", "jolas", "kimra",  "lantos", "movir",
                                             "neldo", "parsit"};
  return v;
}
inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v = {"arvel", "bruni", "costa", "drell",
                                             "evine", "frato", "gilda", "horan"};
  return v;
}
inline const std::vector<std::string>& adverbs() {
  static const std::vector<std::string> v = {"ixo", "yemi", "zolu", "quen", "ulto", "ivar"};
  return v;
}
inline const std::vector<std::string>& determiners() {
  static const std::vector<std::string> v = {"ota", "eni", "usk", "alo"};
  return v;
}

inline std::vector<std::string> all() {
  std::vector<std::string> out;
  for (const auto& g : {nouns(), verbs(), adjectives(), adverbs(), determiners()}) {
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

}  // namespace toywords

// Seeded template grammar: DET [ADJ] NOUN VERB DET [ADJ] NOUN [ADV], with a
// connective clause sometimes appended. Sentences are 4-10 words over a
// closed 46-word inventory, enough structure for a toy model to learn.
inline std::vector<std::string> generate_corpus(int sentences, uint64_t seed) {
  if (sentences < 1) throw InputError("generate_corpus: need at least one sentence");
  Rng rng(sub_seed(seed, 0xC0));
  auto pick = [&](const std::vector<std::string>& pool) {
    return pool[static_cast<size_t>(rng.index(static_cast<int64_t>(pool.size())))];
  };
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(sentences));
  for (int i = 0; i < sentences; ++i) {
    std::vector<std::string> w;
    w.push_back(pick(toywords::determiners()));
    if (rng.uniform() < 0.5) w.push_back(pick(toywords::adjectives()));
    w.push_back(pick(toywords::nouns()));
    w.push_back(pick(toywords::verbs()));
    w.push_back(pick(toywords::determiners()));
    if (rng.uniform() < 0.4) w.push_back(pick(toywords::adjectives()));
    w.push_back(pick(toywords::nouns()));
    if (rng.uniform() < 0.35) w.push_back(pick(toywords::adverbs()));
    if (rng.uniform() < 0.2) {
      w.push_back(pick(toywords::verbs()));
      w.push_back(pick(toywords::nouns()));
    }
    std::string s;
    for (size_t j = 0; j < w.size(); ++j) {
      if (j) s += ' ';
      s += w[j];
    }
    out.push_back(std::move(s));
  }
  return out;
}

// tab-separated "source\ttarget" pairs
struct Pair {
  std::string src, tgt;
};

inline std::vector<Pair> read_pairs(const std::string& path) {
  std::vector<Pair> pairs;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError("paired corpus line missing tab separator: " + line);
    }
    pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return pairs;
}

inline void write_pairs(const std::string& path, const std::vector<Pair>& pairs) {
  std::vector<std::string> lines;
  lines.reserve(pairs.size());
  for (const auto& p : pairs) lines.push_back(p.src + "\t" + p.tgt);
  write_lines(path, lines);
}

}  // namespace mass
