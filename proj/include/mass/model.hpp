// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Encoder-decoder transformer over the tape: token/position/language
// embeddings, pre-layer-norm blocks, multi-head attention, and an output
// projection. The decoder looks its position embeddings up at explicit
// position indices, so a compacted fragment keeps its original positions.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mass/common.hpp"
#include "mass/masking.hpp"
#include "mass/tensor.hpp"
#include "mass/tokenizer.hpp"

namespace mass {

// additive score for disallowed attention positions; exp() underflows to 0
constexpr double kMaskedScore = -1e30;

struct ModelConfig {
  int layers = 2;
  int model_dim = 64;
  int heads = 4;
  int ffn_dim = 256;
  int vocab_size = 0;
  int max_positions = 128;
  int num_languages = 2;
  double dropout = 0.0;
  bool learned_positions = false;
  bool tie_embeddings = false;

  void validate() const {
    if (vocab_size < 2) throw ConfigError("model: vocab_size too small");
    if (model_dim % heads != 0) throw ConfigError("model: model_dim must be divisible by heads");
    if (layers < 1 || model_dim < 2 || heads < 1 || ffn_dim < 1 || max_positions < 1 ||
        num_languages < 1) {
      throw ConfigError("model: invalid configuration");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
  }
};

// One field set shared between value storage (T = Tensor) and tape handles
// (T = Var). for_each fixes the parameter order used by checkpoints, Adam
// state, and gradient collection.
template <typename T>
struct ParamSet {
  struct Attn {
    T wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct EncLayer {
    T ln1_g, ln1_b;
    Attn attn;
    T ln2_g, ln2_b;
    T ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };
  struct DecLayer {
    T ln1_g, ln1_b;
    Attn self_attn;
    T lnx_g, lnx_b;
    Attn cross_attn;
    T ln2_g, ln2_b;
    T ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };

  T token_emb;
  T pos_emb;  // learned positions only
  T lang_emb;
  std::vector<EncLayer> enc;
  std::vector<DecLayer> dec;
  T enc_ln_g, enc_ln_b;
  T dec_ln_g, dec_ln_b;
  T out_w;  // absent when embeddings are tied
  T out_b;

  template <typename F>
  void for_each(const ModelConfig& cfg, F&& f) {
    f("token_emb", token_emb);
    if (cfg.learned_positions) f("pos_emb", pos_emb);
    f("lang_emb", lang_emb);
    auto visit_attn = [&](const std::string& p, Attn& a) {
      f(p + ".wq", a.wq);
      f(p + ".bq", a.bq);
      f(p + ".wk", a.wk);
      f(p + ".bk", a.bk);
      f(p + ".wv", a.wv);
      f(p + ".bv", a.bv);
      f(p + ".wo", a.wo);
      f(p + ".bo", a.bo);
    };
    for (size_t i = 0; i < enc.size(); ++i) {
      std::string p = "enc." + std::to_string(i);
      f(p + ".ln1_g", enc[i].ln1_g);
      f(p + ".ln1_b", enc[i].ln1_b);
      visit_attn(p + ".attn", enc[i].attn);
      f(p + ".ln2_g", enc[i].ln2_g);
      f(p + ".ln2_b", enc[i].ln2_b);
      f(p + ".ffn_w1", enc[i].ffn_w1);
      f(p + ".ffn_b1", enc[i].ffn_b1);
      f(p + ".ffn_w2", enc[i].ffn_w2);
      f(p + ".ffn_b2", enc[i].ffn_b2);
    }
    f("enc_ln_g", enc_ln_g);
    f("enc_ln_b", enc_ln_b);
    for (size_t i = 0; i < dec.size(); ++i) {
      std::string p = "dec." + std::to_string(i);
      f(p + ".ln1_g", dec[i].ln1_g);
      f(p + ".ln1_b", dec[i].ln1_b);
      visit_attn(p + ".self_attn", dec[i].self_attn);
      f(p + ".lnx_g", dec[i].lnx_g);
      f(p + ".lnx_b", dec[i].lnx_b);
      visit_attn(p + ".cross_attn", dec[i].cross_attn);
      f(p + ".ln2_g", dec[i].ln2_g);
      f(p + ".ln2_b", dec[i].ln2_b);
      f(p + ".ffn_w1", dec[i].ffn_w1);
      f(p + ".ffn_b1", dec[i].ffn_b1);
      f(p + ".ffn_w2", dec[i].ffn_w2);
      f(p + ".ffn_b2", dec[i].ffn_b2);
    }
    f("dec_ln_g", dec_ln_g);
    f("dec_ln_b", dec_ln_b);
    if (!cfg.tie_embeddings) f("out_w", out_w);
    f("out_b", out_b);
  }
};

struct ModelParams {
  ModelConfig cfg;
  ParamSet<Tensor> p;

  template <typename F>
  void for_each(F&& f) {
    p.for_each(cfg, std::forward<F>(f));
  }

  std::vector<Tensor*> ordered() {
    std::vector<Tensor*> out;
    for_each([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
  }

  std::vector<std::string> names() {
    std::vector<std::string> out;
    for_each([&](const std::string& n, Tensor&) { out.push_back(n); });
    return out;
  }

  int64_t param_count() {
    int64_t n = 0;
    for_each([&](const std::string&, Tensor& t) { n += t.numel(); });
    return n;
  }
};

inline ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(sub_seed(seed, 0x1217));
  const int d = cfg.model_dim, f = cfg.ffn_dim, V = cfg.vocab_size;
  const double std_w = 0.02;
  ModelParams mp;
  mp.cfg = cfg;
  auto w = [&](int r, int c) { return Tensor::randn({r, c}, rng, std_w); };
  auto zero = [&](int n) { return Tensor::zeros({n}); };
  auto ones = [&](int n) { return Tensor::full({n}, 1.0); };
  auto attn = [&] {
    typename ParamSet<Tensor>::Attn a;
    a.wq = w(d, d);
    a.bq = zero(d);
    a.wk = w(d, d);
    a.bk = zero(d);
    a.wv = w(d, d);
    a.bv = zero(d);
    a.wo = w(d, d);
    a.bo = zero(d);
    return a;
  };
  mp.p.token_emb = w(V, d);
  if (cfg.learned_positions) mp.p.pos_emb = w(cfg.max_positions, d);
  mp.p.lang_emb = w(cfg.num_languages, d);
  for (int i = 0; i < cfg.layers; ++i) {
    typename ParamSet<Tensor>::EncLayer e;
    e.ln1_g = ones(d);
    e.ln1_b = zero(d);
    e.attn = attn();
    e.ln2_g = ones(d);
    e.ln2_b = zero(d);
    e.ffn_w1 = w(d, f);
    e.ffn_b1 = zero(f);
    e.ffn_w2 = w(f, d);
    e.ffn_b2 = zero(d);
    mp.p.enc.push_back(std::move(e));
    typename ParamSet<Tensor>::DecLayer dl;
    dl.ln1_g = ones(d);
    dl.ln1_b = zero(d);
    dl.self_attn = attn();
    dl.lnx_g = ones(d);
    dl.lnx_b = zero(d);
    dl.cross_attn = attn();
    dl.ln2_g = ones(d);
    dl.ln2_b = zero(d);
    dl.ffn_w1 = w(d, f);
    dl.ffn_b1 = zero(f);
    dl.ffn_w2 = w(f, d);
    dl.ffn_b2 = zero(d);
    mp.p.dec.push_back(std::move(dl));
  }
  mp.p.enc_ln_g = ones(d);
  mp.p.enc_ln_b = zero(d);
  mp.p.dec_ln_g = ones(d);
  mp.p.dec_ln_b = zero(d);
  if (!cfg.tie_embeddings) mp.p.out_w = w(d, V);
  mp.p.out_b = zero(V);
  return mp;
}

// ---------------------------------------------------------------------------
// attention masks

inline Tensor zero_mask(int rows, int cols) { return Tensor({rows, cols}, 0.0); }

inline Tensor causal_mask(int n) {
  Tensor m({n, n}, kMaskedScore);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m.at(i, j) = 0.0;
  return m;
}

// Self-attention mask for the full-length (keep-padding) decoder: fragment
// queries attend only within the fragment prefix, which makes the fragment
// rows compute exactly the compacted decoder's function. Rows outside the
// fragment keep plain causal access; their outputs carry no loss.
inline Tensor keep_padding_mask(int m, Span span) {
  Tensor msk({m, m}, kMaskedScore);
  for (int i = 0; i < m; ++i) {
    if (i >= span.u && i <= span.v) {
      for (int j = span.u; j <= i; ++j) msk.at(i, j) = 0.0;
    } else {
      for (int j = 0; j <= i; ++j) msk.at(i, j) = 0.0;
    }
  }
  return msk;
}

// softmax(q k^T / sqrt(d_head) + mask) v, with mask additive over key
// positions. Masked keys receive weight < 1e-12; a query row with no
// admissible key is an error.
inline Var attention(Tape& t, Var q, Var k, Var v, const Tensor& mask) {
  const Tensor& tq = t.value(q);
  const Tensor& tk = t.value(k);
  if (mask.rank() != 2 || mask.shape[0] != tq.shape[0] || mask.shape[1] != tk.shape[0]) {
    throw DimensionError("attention: mask " + shape_str(mask.shape) + " does not cover " +
                         shape_str(tq.shape) + " x " + shape_str(tk.shape));
  }
  for (int i = 0; i < mask.shape[0]; ++i) {
    bool any = false;
    for (int j = 0; j < mask.shape[1] && !any; ++j) any = mask.at(i, j) > kMaskedScore / 2;
    if (!any) throw ContractError(strf("attention: query row %d has no unmasked key", i));
  }
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(tq.shape[1]));
  Var scores = t.add(t.scale(t.matmul_nt(q, k), inv_sqrt), t.constant(mask));
  return t.matmul(t.softmax(scores, 1), v);
}

// Sinusoidal position rows: even columns sine, odd columns cosine.
inline Tensor sinusoid_rows(const std::vector<int>& positions, int d) {
  Tensor out({static_cast<int>(positions.size()), d});
  for (size_t r = 0; r < positions.size(); ++r) {
    for (int j = 0; j < d; ++j) {
      double exponent = static_cast<double>(2 * (j / 2)) / d;
      double angle = positions[r] / std::pow(10000.0, exponent);
      out.at(static_cast<int>(r), j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// one tape-bound instantiation of the model

class TransformerRun {
 public:
  // Leafs every parameter onto the tape (in for_each order) so one backward
  // yields gradients for the whole model.
  TransformerRun(Tape& tape, ModelParams& params, Rng* dropout_rng = nullptr)
      : tape_(tape), cfg_(params.cfg), drop_rng_(dropout_rng) {
    cfg_.validate();
    mirror(params);
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<Var>& leaves() const { return leaf_order_; }
  Tape& tape() const { return tape_; }

  // Encoder: token + position + language embedding, then pre-LN blocks and a
  // final norm. Deterministic with dropout disabled.
  Var encode(const std::vector<int>& ids, int language) const {
    const int m = static_cast<int>(ids.size());
    if (m == 0) throw InputError("encode: empty input");
    if (m > cfg_.max_positions) {
      throw InputError(strf("encode: input length %d exceeds max_positions %d", m,
                            cfg_.max_positions));
    }
    std::vector<int> positions(m);
    for (int i = 0; i < m; ++i) positions[i] = i;
    Var x = embed(ids, positions, language);
    Tensor msk = zero_mask(m, m);
    for (const auto& layer : pv_.enc) {
      Var h = tape_.layer_norm(x, layer.ln1_g, layer.ln1_b);
      x = tape_.add(x, dropout(mha(layer.attn, h, h, msk)));
      h = tape_.layer_norm(x, layer.ln2_g, layer.ln2_b);
      x = tape_.add(x, dropout(ffn(layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2, h)));
    }
    return tape_.layer_norm(x, pv_.enc_ln_g, pv_.enc_ln_b);
  }

  // Decoder over explicit positions: position embeddings come from
  // `positions`, not 0..k-1, preserving fragment positions after padding
  // removal. `self_mask` defaults to causal over the given order.
  Var decode(const std::vector<int>& ids, const std::vector<int>& positions, Var memory,
             int language, const Tensor* self_mask = nullptr) const {
    const int k = static_cast<int>(ids.size());
    if (k == 0) throw InputError("decode: empty decoder input");
    if (positions.size() != ids.size()) {
      throw InputError("decode: positions and ids lengths differ");
    }
    for (size_t i = 0; i + 1 < positions.size(); ++i) {
      if (positions[i] >= positions[i + 1]) {
        throw InputError("decode: positions must be strictly increasing");
      }
    }
    Var x = embed(ids, positions, language);
    Tensor self_msk = self_mask ? *self_mask : causal_mask(k);
    Tensor cross_msk = zero_mask(k, t_rows(memory));
    for (const auto& layer : pv_.dec) {
      Var h = tape_.layer_norm(x, layer.ln1_g, layer.ln1_b);
      x = tape_.add(x, dropout(mha(layer.self_attn, h, h, self_msk)));
      h = tape_.layer_norm(x, layer.lnx_g, layer.lnx_b);
      x = tape_.add(x, dropout(mha_kv(layer.cross_attn, h, memory, cross_msk)));
      h = tape_.layer_norm(x, layer.ln2_g, layer.ln2_b);
      x = tape_.add(x, dropout(ffn(layer.ffn_w1, layer.ffn_b1, layer.ffn_w2, layer.ffn_b2, h)));
    }
    x = tape_.layer_norm(x, pv_.dec_ln_g, pv_.dec_ln_b);
    return output_logits(x);
  }

  Var output_logits(Var hidden) const {
    Var logits = cfg_.tie_embeddings ? tape_.matmul_nt(hidden, pv_.token_emb)
                                     : tape_.matmul(hidden, pv_.out_w);
    return tape_.add_row(logits, pv_.out_b);
  }

 private:
  void mirror(ModelParams& params) {
    // leaf tensors in enumeration order and rebuild the Var mirror in the
    // same order
    std::vector<Var> vars;
    params.for_each([&](const std::string&, Tensor& t) { vars.push_back(tape_.leaf(t)); });
    leaf_order_ = vars;
    size_t i = 0;
    // shape the mirror containers to match
    pv_.enc.resize(params.p.enc.size());
    pv_.dec.resize(params.p.dec.size());
    pv_.for_each(cfg_, [&](const std::string&, Var& v) { v = vars[i++]; });
    if (i != vars.size()) throw ContractError("parameter mirror out of sync");
  }

  int t_rows(Var v) const { return tape_.value(v).shape[0]; }

  Var embed(const std::vector<int>& ids, const std::vector<int>& positions, int language) const {
    for (int id : ids) {
      if (id < 0 || id >= cfg_.vocab_size) {
        throw IndexError(strf("embed: token id %d outside vocabulary of %d", id, cfg_.vocab_size));
      }
    }
    for (int p : positions) {
      if (p < 0 || p >= cfg_.max_positions) {
        throw InputError(strf("embed: position %d outside max_positions %d", p,
                              cfg_.max_positions));
      }
    }
    if (language < 0 || language >= cfg_.num_languages) {
      throw InputError(strf("embed: language tag %d outside num_languages %d", language,
                            cfg_.num_languages));
    }
    Var x = tape_.gather_rows(pv_.token_emb, ids);
    if (cfg_.learned_positions) {
      x = tape_.add(x, tape_.gather_rows(pv_.pos_emb, positions));
    } else {
      x = tape_.add(x, tape_.constant(sinusoid_rows(positions, cfg_.model_dim)));
    }
    x = tape_.add_row(x, tape_.gather_rows(pv_.lang_emb, {language}));
    return dropout(x);
  }

  Var mha(const typename ParamSet<Var>::Attn& w, Var x, Var kv, const Tensor& mask) const {
    return mha_kv(w, x, kv, mask);
  }

  Var mha_kv(const typename ParamSet<Var>::Attn& w, Var q_in, Var kv_in,
             const Tensor& mask) const {
    Var q = tape_.add_row(tape_.matmul(q_in, w.wq), w.bq);
    Var k = tape_.add_row(tape_.matmul(kv_in, w.wk), w.bk);
    Var v = tape_.add_row(tape_.matmul(kv_in, w.wv), w.bv);
    const int dh = cfg_.model_dim / cfg_.heads;
    std::vector<Var> heads;
    heads.reserve(cfg_.heads);
    for (int h = 0; h < cfg_.heads; ++h) {
      heads.push_back(attention(tape_, tape_.slice_cols(q, h * dh, dh),
                                tape_.slice_cols(k, h * dh, dh), tape_.slice_cols(v, h * dh, dh),
                                mask));
    }
    return tape_.add_row(tape_.matmul(tape_.concat_cols(heads), w.wo), w.bo);
  }

  Var ffn(Var w1, Var b1, Var w2, Var b2, Var x) const {
    Var h = tape_.relu(tape_.add_row(tape_.matmul(x, w1), b1));
    return tape_.add_row(tape_.matmul(h, w2), b2);
  }

  Var dropout(Var x) const {
    if (cfg_.dropout <= 0.0 || drop_rng_ == nullptr) return x;
    const Tensor& v = tape_.value(x);
    Tensor mask(v.shape);
    double keep = 1.0 - cfg_.dropout;
    for (int64_t i = 0; i < mask.numel(); ++i) {
      mask[i] = drop_rng_->uniform() < keep ? 1.0 / keep : 0.0;
    }
    return tape_.mul(x, tape_.constant(mask));
  }

  Tape& tape_;
  ModelConfig cfg_;
  ParamSet<Var> pv_;
  Rng* drop_rng_;
  std::vector<Var> leaf_order_;
};

}  // namespace mass
