// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Byte-pair-encoding subword tokenizer: greedy most-frequent-pair learning
// with lexicographic tie-breaking, whitespace pre-tokenization, and a "</w>"
// marker attached to each word-final symbol.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mass/common.hpp"

namespace mass {

// Reserved ids occupy the lowest indices. Two language tags are reserved so
// a single model can host a bilingual setup.
namespace special {
constexpr int kPad = 0;
constexpr int kMask = 1;
constexpr int kBos = 2;
constexpr int kEos = 3;
constexpr int kUnk = 4;
constexpr int kLang0 = 5;
constexpr int kLang1 = 6;
constexpr int kCount = 7;

inline const char* name(int id) {
  static const char* names[kCount] = {"<pad>", "<mask>", "<bos>", "<eos>",
                                      "<unk>", "<lang0>", "<lang1>"};
  return names[id];
}

inline int lang(int index) { return kLang0 + index; }
}  // namespace special

constexpr const char* kWordEnd = "</w>";

struct Vocab {
  std::vector<std::string> id_to_tok;
  std::unordered_map<std::string, int> tok_to_id;

  int add(const std::string& tok) {
    auto it = tok_to_id.find(tok);
    if (it != tok_to_id.end()) return it->second;
    int id = static_cast<int>(id_to_tok.size());
    id_to_tok.push_back(tok);
    tok_to_id.emplace(tok, id);
    return id;
  }

  int lookup(const std::string& tok) const {
    auto it = tok_to_id.find(tok);
    return it == tok_to_id.end() ? -1 : it->second;
  }

  int size() const { return static_cast<int>(id_to_tok.size()); }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) throw IndexError(strf("vocab id %d out of range [0, %d)", id, size()));
    return id_to_tok[id];
  }

  static Vocab with_specials() {
    Vocab v;
    for (int i = 0; i < special::kCount; ++i) v.add(special::name(i));
    return v;
  }
};

struct MergeTable {
  // rank == position; strictly increasing by construction
  std::vector<std::pair<std::string, std::string>> rules;

  std::map<std::pair<std::string, std::string>, int> rank_index() const {
    std::map<std::pair<std::string, std::string>, int> idx;
    for (size_t i = 0; i < rules.size(); ++i) idx.emplace(rules[i], static_cast<int>(i));
    return idx;
  }
};

namespace detail {

// Split UTF-8 into code-point strings. Invalid bytes pass through singly.
inline std::vector<std::string> utf8_chars(const std::string& word) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < word.size()) {
    unsigned char c = static_cast<unsigned char>(word[i]);
    size_t len = 1;
    if ((c & 0x80u) == 0)
      len = 1;
    else if ((c & 0xE0u) == 0xC0u)
      len = 2;
    else if ((c & 0xF0u) == 0xE0u)
      len = 3;
    else if ((c & 0xF8u) == 0xF0u)
      len = 4;
    if (i + len > word.size()) len = 1;
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> words;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) words.push_back(line.substr(i, j - i));
    i = j;
  }
  return words;
}

// Initial symbolization of a word: code points, word-final symbol suffixed
// with the end-of-word marker.
inline std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms = utf8_chars(word);
  if (!syms.empty()) syms.back() += kWordEnd;
  return syms;
}

}  // namespace detail

class Bpe {
 public:
  Bpe() : vocab_(Vocab::with_specials()) {}
  Bpe(Vocab vocab, MergeTable merges)
      : vocab_(std::move(vocab)), merges_(std::move(merges)), ranks_(merges_.rank_index()) {}

  const Vocab& vocab() const { return vocab_; }
  const MergeTable& merges() const { return merges_; }
  int64_t unk_count() const { return unk_count_; }

  // Greedy most-frequent-pair learning over whitespace-tokenized lines.
  // Ties break on the lexicographically smallest (left, right) pair, which
  // makes learning order-independent given equal corpora.
  static Bpe learn(const std::vector<std::string>& lines, int num_merges) {
    if (lines.empty()) throw InputError("bpe_learn: empty corpus");
    std::map<std::string, int64_t> word_counts;
    for (const auto& line : lines) {
      for (const auto& w : detail::split_ws(line)) ++word_counts[w];
    }
    if (word_counts.empty()) throw InputError("bpe_learn: corpus contains no words");
    if (num_merges < 0) throw InputError("bpe_learn: num_merges must be >= 0");

    std::vector<std::pair<std::vector<std::string>, int64_t>> words;
    words.reserve(word_counts.size());
    for (const auto& [w, c] : word_counts) words.emplace_back(detail::word_symbols(w), c);

    Vocab vocab = Vocab::with_specials();
    {
      // every seen code point enters in both plain and word-final form, so
      // any text over the alphabet round-trips regardless of position
      std::map<std::string, bool> alphabet;
      for (const auto& [w, c] : word_counts) {
        for (const auto& ch : detail::utf8_chars(w)) {
          alphabet[ch] = true;
          alphabet[ch + kWordEnd] = true;
        }
      }
      for (const auto& [s, _] : alphabet) vocab.add(s);
    }

    MergeTable merges;
    for (int step = 0; step < num_merges; ++step) {
      std::map<std::pair<std::string, std::string>, int64_t> pair_counts;
      for (const auto& [syms, c] : words) {
        for (size_t i = 0; i + 1 < syms.size(); ++i) pair_counts[{syms[i], syms[i + 1]}] += c;
      }
      if (pair_counts.empty()) break;
      // max count; std::map iteration order gives the lexicographic tie-break
      auto best = pair_counts.begin();
      for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      const auto rule = best->first;
      merges.rules.push_back(rule);
      vocab.add(rule.first + rule.second);
      for (auto& [syms, c] : words) merge_in_place(syms, rule);
    }
    return Bpe(std::move(vocab), std::move(merges));
  }

  std::vector<int> encode(const std::string& text) {
    std::vector<int> ids;
    for (const auto& word : detail::split_ws(text)) {
      std::vector<std::string> syms = detail::word_symbols(word);
      apply_merges(syms);
      for (const auto& s : syms) {
        int id = vocab_.lookup(s);
        if (id < 0) {
          id = special::kUnk;
          ++unk_count_;
        }
        ids.push_back(id);
      }
    }
    return ids;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
      std::string tok = id == special::kUnk ? "<unk>" : vocab_.token(id);
      if (tok.size() >= 4 && tok.compare(tok.size() - 4, 4, kWordEnd) == 0) {
        out += tok.substr(0, tok.size() - 4);
        out += ' ';
      } else {
        out += tok;
      }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
  }

  // ---- file formats ----
  // vocab: one token per line, id = line number
  // merges: one "left right" pair per line in rank order

  void save(const std::string& vocab_path, const std::string& merges_path) const {
    std::ofstream vf(vocab_path);
    if (!vf) throw InputError("cannot write vocab file: " + vocab_path);
    for (const auto& tok : vocab_.id_to_tok) vf << tok << "\n";
    std::ofstream mf(merges_path);
    if (!mf) throw InputError("cannot write merges file: " + merges_path);
    for (const auto& [l, r] : merges_.rules) mf << l << " " << r << "\n";
  }

  static Bpe load(const std::string& vocab_path, const std::string& merges_path) {
    std::ifstream vf(vocab_path);
    if (!vf) throw InputError("cannot read vocab file: " + vocab_path);
    Vocab vocab;
    std::string line;
    while (std::getline(vf, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      vocab.add(line);
    }
    for (int i = 0; i < special::kCount; ++i) {
      if (i >= vocab.size() || vocab.id_to_tok[i] != special::name(i)) {
        throw ConfigError("vocab file missing reserved specials: " + vocab_path);
      }
    }
    std::ifstream mf(merges_path);
    if (!mf) throw InputError("cannot read merges file: " + merges_path);
    MergeTable merges;
    while (std::getline(mf, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      size_t sp = line.find(' ');
      if (sp == std::string::npos) throw ConfigError("malformed merge rule: " + line);
      merges.rules.emplace_back(line.substr(0, sp), line.substr(sp + 1));
    }
    return Bpe(std::move(vocab), std::move(merges));
  }

 private:
  static void merge_in_place(std::vector<std::string>& syms,
                             const std::pair<std::string, std::string>& rule) {
    std::vector<std::string> out;
    out.reserve(syms.size());
    size_t i = 0;
    while (i < syms.size()) {
      if (i + 1 < syms.size() && syms[i] == rule.first && syms[i + 1] == rule.second) {
        out.push_back(rule.first + rule.second);
        i += 2;
      } else {
        out.push_back(syms[i]);
        ++i;
      }
    }
    syms.swap(out);
  }

  void apply_merges(std::vector<std::string>& syms) const {
    while (syms.size() > 1) {
      int best_rank = -1;
      size_t best_pos = 0;
      for (size_t i = 0; i + 1 < syms.size(); ++i) {
        auto it = ranks_.find({syms[i], syms[i + 1]});
        if (it != ranks_.end() && (best_rank < 0 || it->second < best_rank)) {
          best_rank = it->second;
          best_pos = i;
        }
      }
      if (best_rank < 0) break;
      merge_in_place(syms, merges_.rules[static_cast<size_t>(best_rank)]);
      (void)best_pos;
    }
  }

  Vocab vocab_;
  MergeTable merges_;
  std::map<std::pair<std::string, std::string>, int> ranks_;
  int64_t unk_count_ = 0;
};

}  // namespace mass
