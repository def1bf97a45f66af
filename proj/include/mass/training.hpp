// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Pre-training: Adam, the masked seq2seq step over example batches, periodic
// validation perplexity, and the two-phase BERT+LM baseline.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mass/corpus.hpp"
#include "mass/io.hpp"
#include "mass/masking.hpp"
#include "mass/model.hpp"

namespace mass {

struct TrainAbortError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<Tensor> m, v;

  void init_for(ModelParams& params) {
    m.clear();
    v.clear();
    params.for_each([&](const std::string&, Tensor& t) {
      m.push_back(Tensor::zeros(t.shape));
      v.push_back(Tensor::zeros(t.shape));
    });
    step = 0;
  }
};

inline double global_grad_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g.data) sq += x * x;
  return std::sqrt(sq);
}

inline void clip_grads(std::vector<Tensor>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double norm = global_grad_norm(grads);
  if (norm <= max_norm) return;
  double s = max_norm / norm;
  for (auto& g : grads)
    for (double& x : g.data) x *= s;
}

// Standard bias-corrected Adam over the declared parameter order.
inline void adam_update(ModelParams& params, const std::vector<Tensor>& grads, AdamState& st) {
  auto ordered = params.ordered();
  if (ordered.size() != grads.size() || st.m.size() != grads.size()) {
    throw ContractError("adam_update: parameter/gradient/state sizes disagree");
  }
  ++st.step;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < ordered.size(); ++i) {
    Tensor& p = *ordered[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g)) throw ContractError("adam_update: gradient shape mismatch");
    for (int64_t j = 0; j < p.numel(); ++j) {
      double gj = g[j];
      st.m[i][j] = st.beta1 * st.m[i][j] + (1.0 - st.beta1) * gj;
      st.v[i][j] = st.beta2 * st.v[i][j] + (1.0 - st.beta2) * gj * gj;
      double mhat = st.m[i][j] / bc1;
      double vhat = st.v[i][j] / bc2;
      p[j] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// configuration

enum class Objective { kMass, kDiscrete, kFeed, kDae, kBertLm };

inline const char* objective_name(Objective o) {
  switch (o) {
    case Objective::kMass: return "MASS";
    case Objective::kDiscrete: return "Discrete";
    case Objective::kFeed: return "Feed";
    case Objective::kDae: return "DAE";
    case Objective::kBertLm: return "BERT+LM";
  }
  return "?";
}

inline Objective parse_objective(const std::string& s) {
  if (s == "MASS") return Objective::kMass;
  if (s == "Discrete") return Objective::kDiscrete;
  if (s == "Feed") return Objective::kFeed;
  if (s == "DAE") return Objective::kDae;
  if (s == "BERT+LM") return Objective::kBertLm;
  throw ConfigError("unknown objective mode: " + s);
}

inline MaskMode objective_mask_mode(Objective o) {
  switch (o) {
    case Objective::kDiscrete: return MaskMode::kDiscrete;
    case Objective::kFeed: return MaskMode::kFeed;
    case Objective::kDae: return MaskMode::kDae;
    default: return MaskMode::kMass;
  }
}

struct TrainConfig {
  Objective objective = Objective::kMass;
  double mask_ratio = 0.5;
  bool k_one = false;  // fixed k=1 regardless of sentence length
  int batch_tokens = 256;
  int64_t steps = 100;
  uint64_t seed = 1;
  int64_t eval_every = 50;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;  // 0 disables
  bool keep_padding = false;
  bool dae_swap = false;
  int length_cap = 64;

  void validate() const {
    if (!(mask_ratio > 0.0 && mask_ratio <= 1.0)) {
      throw ConfigError("train: mask_ratio must be in (0, 1]");
    }
    if (batch_tokens < 1 || steps < 0 || eval_every < 1 || length_cap < 1) {
      throw ConfigError("train: invalid sizes");
    }
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
  }

  std::string k_ratio_label() const {
    if (k_one) return "k1";
    if (mask_ratio == 1.0) return "km";
    return strf("%g", mask_ratio);
  }

  static TrainConfig from_kv(const KvGet& kv) {
    TrainConfig c;
    c.objective = parse_objective(kv.str("mode", "MASS"));
    c.mask_ratio = kv.d("mask_ratio", c.mask_ratio);
    c.k_one = kv.b("k_one", c.k_one);
    c.batch_tokens = kv.i("batch_tokens", c.batch_tokens);
    c.steps = kv.i64("steps", c.steps);
    c.seed = static_cast<uint64_t>(kv.i64("seed", static_cast<int64_t>(c.seed)));
    c.eval_every = kv.i64("eval_every", c.eval_every);
    c.lr = kv.d("lr", c.lr);
    c.beta1 = kv.d("beta1", c.beta1);
    c.beta2 = kv.d("beta2", c.beta2);
    c.adam_eps = kv.d("adam_eps", c.adam_eps);
    c.clip_norm = kv.d("clip_norm", c.clip_norm);
    c.keep_padding = kv.b("keep_padding", c.keep_padding);
    c.dae_swap = kv.b("dae_swap", c.dae_swap);
    c.length_cap = kv.i("length_cap", c.length_cap);
    c.validate();
    return c;
  }

  std::string to_kv() const {
    std::string s;
    s += strf("mode=%s\n", objective_name(objective));
    s += strf("mask_ratio=%.17g\n", mask_ratio);
    s += strf("k_one=%d\n", k_one ? 1 : 0);
    s += strf("batch_tokens=%d\n", batch_tokens);
    s += strf("steps=%lld\n", static_cast<long long>(steps));
    s += strf("seed=%llu\n", static_cast<unsigned long long>(seed));
    s += strf("eval_every=%lld\n", static_cast<long long>(eval_every));
    s += strf("lr=%.17g\n", lr);
    s += strf("beta1=%.17g\n", beta1);
    s += strf("beta2=%.17g\n", beta2);
    s += strf("adam_eps=%.17g\n", adam_eps);
    s += strf("clip_norm=%.17g\n", clip_norm);
    s += strf("keep_padding=%d\n", keep_padding ? 1 : 0);
    s += strf("dae_swap=%d\n", dae_swap ? 1 : 0);
    s += strf("length_cap=%d\n", length_cap);
    return s;
  }
};

// line-delimited experiment records
struct ReportRow {
  int64_t step = 0;
  std::string mode;
  std::string k_ratio;
  double train_loss = 0.0;
  double valid_ppl = 0.0;
  uint64_t seed = 0;

  std::string line() const {
    return strf("step=%lld mode=%s k_ratio=%s train_loss=%.9g valid_ppl=%.9g seed=%llu",
                static_cast<long long>(step), mode.c_str(), k_ratio.c_str(), train_loss,
                valid_ppl, static_cast<unsigned long long>(seed));
  }
};

struct TrainStats {
  int64_t steps = 0;
  int64_t examples = 0;
  int64_t target_tokens = 0;
  int64_t decoder_tokens = 0;  // decoder input slots actually processed
  std::vector<int64_t> batches_per_language;
};

// ---------------------------------------------------------------------------
// batches

struct Batch {
  std::vector<MaskedExample> examples;
  std::vector<int> sentence_ids;
};

inline Span pick_span(int m, const TrainConfig& cfg, Rng& rng) {
  if (cfg.k_one) return span_for_length(m, 1, rng);
  return sample_span(m, cfg.mask_ratio, rng);
}

// Fill a batch up to the token budget (at least one example), sampling
// sentences uniformly. Per-example randomness is seeded by (seed, step,
// slot) so construction order never changes the stream.
inline Batch build_batch(const TokenizedCorpus& corpus, const TrainConfig& cfg,
                         const CorruptPolicy& policy, MaskMode mode, int64_t step,
                         bool keep_padding) {
  if (corpus.sentences.empty()) throw InputError("build_batch: empty corpus");
  Batch batch;
  Rng pick_rng(sub_seed(cfg.seed, 0xBA7C4, static_cast<uint64_t>(step)));
  int budget = cfg.batch_tokens;
  int used = 0;
  for (int slot = 0;; ++slot) {
    int idx = static_cast<int>(pick_rng.index(static_cast<int64_t>(corpus.sentences.size())));
    const auto& sent = corpus.sentences[static_cast<size_t>(idx)];
    int m = static_cast<int>(sent.size());
    if (!batch.examples.empty() && used + m > budget) break;
    Rng ex_rng(sub_seed(cfg.seed, static_cast<uint64_t>(step) * 1000003ull,
                        static_cast<uint64_t>(slot)));
    Span span = pick_span(m, cfg, ex_rng);
    MaskedExample ex = build_example(sent, span, ex_rng, mode, policy, keep_padding, cfg.dae_swap);
    ex.language = corpus.language;
    batch.examples.push_back(std::move(ex));
    batch.sentence_ids.push_back(idx);
    used += m;
    if (used >= budget) break;
  }
  return batch;
}

// ---------------------------------------------------------------------------
// forward / backward over a batch

struct BatchGrads {
  double loss = 0.0;  // mean NLL per target token
  int64_t target_tokens = 0;
  int64_t decoder_tokens = 0;
  std::vector<Tensor> grads;  // declared parameter order
};

namespace detail {

struct ExampleLoss {
  Var ce;
  int64_t count = 0;
};

// Per-example subgraph. BERT+LM phase 1 bypasses the decoder through the
// output head on the encoder memory (the MLM-equivalent classifier).
inline ExampleLoss example_loss(const TransformerRun& run, Tape& tape, const MaskedExample& ex,
                                bool encoder_head_only) {
  ExampleLoss out;
  Var mem = run.encode(ex.encoder_input, ex.language);
  if (encoder_head_only) {
    Var h = tape.gather_rows(mem, {ex.decoder_positions.at(0)});
    out.ce = tape.cross_entropy(run.output_logits(h), {ex.targets.at(0)});
    out.count = 1;
    return out;
  }
  Tensor kp_mask;
  const Tensor* self_mask = nullptr;
  if (ex.keep_padding) {
    kp_mask = keep_padding_mask(static_cast<int>(ex.encoder_input.size()), ex.span);
    self_mask = &kp_mask;
  }
  Var logits = run.decode(ex.decoder_input, ex.decoder_positions, mem, ex.language, self_mask);
  out.ce = tape.cross_entropy(logits, ex.targets, special::kPad);
  out.count = ex.target_count();
  return out;
}

}  // namespace detail

// One tape over the whole batch: per-token mean NLL across examples, one
// backward pass, gradients in declared order.
inline BatchGrads batch_loss_and_grads(ModelParams& params,
                                       const std::vector<MaskedExample>& batch,
                                       Rng* dropout_rng = nullptr,
                                       bool encoder_head_only = false) {
  if (batch.empty()) throw InputError("batch_loss_and_grads: empty batch");
  Tape tape;
  TransformerRun run(tape, params, dropout_rng);
  std::vector<detail::ExampleLoss> losses;
  BatchGrads out;
  for (const auto& ex : batch) {
    losses.push_back(detail::example_loss(run, tape, ex, encoder_head_only));
    out.target_tokens += losses.back().count;
    out.decoder_tokens += encoder_head_only ? 0 : static_cast<int64_t>(ex.decoder_input.size());
  }
  Var total;
  for (size_t i = 0; i < losses.size(); ++i) {
    double w = static_cast<double>(losses[i].count) / static_cast<double>(out.target_tokens);
    Var term = tape.scale(losses[i].ce, w);
    total = i == 0 ? term : tape.add(total, term);
  }
  out.loss = tape.value(total).item();
  tape.backward(total);
  for (Var leaf : run.leaves()) out.grads.push_back(tape.grad(leaf));
  return out;
}

// Forward-only batch NLL (validation path).
inline std::pair<double, int64_t> batch_nll(ModelParams& params,
                                            const std::vector<MaskedExample>& batch,
                                            bool encoder_head_only = false) {
  if (batch.empty()) throw InputError("batch_nll: empty batch");
  Tape tape;
  TransformerRun run(tape, params);
  double total = 0.0;
  int64_t count = 0;
  for (const auto& ex : batch) {
    auto el = detail::example_loss(run, tape, ex, encoder_head_only);
    total += tape.value(el.ce).item() * static_cast<double>(el.count);
    count += el.count;
  }
  return {total, count};
}

inline bool is_encoder_param(const std::string& name) {
  return name.rfind("enc.", 0) == 0 || name.rfind("enc_ln", 0) == 0;
}

struct StepOptions {
  bool encoder_head_only = false;  // BERT+LM phase 1
  bool freeze_encoder = false;     // BERT+LM phase 2
  double clip_norm = 0.0;
  Rng* dropout_rng = nullptr;
};

// Forward + backward + Adam. Returns the pre-update per-token loss.
inline double mass_step(ModelParams& params, const std::vector<MaskedExample>& batch,
                        AdamState& adam, const StepOptions& opts = {}) {
  BatchGrads bg = batch_loss_and_grads(params, batch, opts.dropout_rng, opts.encoder_head_only);
  if (!std::isfinite(bg.loss)) {
    throw TrainAbortError(strf("non-finite loss %g", bg.loss));
  }
  if (opts.freeze_encoder) {
    size_t i = 0;
    params.for_each([&](const std::string& name, Tensor&) {
      if (is_encoder_param(name)) bg.grads[i] = Tensor::zeros(bg.grads[i].shape);
      ++i;
    });
  }
  clip_grads(bg.grads, opts.clip_norm);
  adam_update(params, bg.grads, adam);
  return bg.loss;
}

// ---------------------------------------------------------------------------
// validation perplexity

// Fixed evaluation seed: masks are identical across runs, so curves from
// different training seeds are comparable.
constexpr uint64_t kEvalSeed = 0x45564131ull;

struct EvalSplit {
  std::vector<std::vector<int>> train;
  std::vector<std::vector<int>> valid;
};

inline EvalSplit split_corpus(const TokenizedCorpus& corpus) {
  EvalSplit s;
  int n = static_cast<int>(corpus.sentences.size());
  int nvalid = std::max(1, std::min(64, n / 10));
  if (n <= nvalid) nvalid = std::max(0, n - 1);
  s.train.assign(corpus.sentences.begin(), corpus.sentences.end() - nvalid);
  s.valid.assign(corpus.sentences.end() - nvalid, corpus.sentences.end());
  if (s.train.empty()) throw InputError("corpus too small to split");
  return s;
}

// Deterministic eval instances: masks depend only on the eval seed, the
// language, and the sentence index.
inline std::vector<MaskedExample> eval_examples(int vocab_size,
                                                const std::vector<TokenizedCorpus>& valid,
                                                const TrainConfig& cfg) {
  CorruptPolicy policy;
  policy.vocab_size = vocab_size;
  MaskMode mode = objective_mask_mode(cfg.objective);
  std::vector<MaskedExample> all;
  for (const auto& corpus : valid) {
    for (size_t i = 0; i < corpus.sentences.size(); ++i) {
      const auto& sent = corpus.sentences[i];
      Rng rng(sub_seed(kEvalSeed, static_cast<uint64_t>(corpus.language) * 7919ull,
                       static_cast<uint64_t>(i)));
      Span span = pick_span(static_cast<int>(sent.size()), cfg, rng);
      MaskedExample ex = build_example(sent, span, rng, mode, policy, cfg.keep_padding,
                                       cfg.dae_swap);
      ex.language = corpus.language;
      all.push_back(std::move(ex));
    }
  }
  return all;
}

// PPL under the objective's masking on held-out sentences.
inline double eval_ppl(ModelParams& params, const std::vector<TokenizedCorpus>& valid,
                       const TrainConfig& cfg, bool encoder_head_only = false) {
  std::vector<MaskedExample> all = eval_examples(params.cfg.vocab_size, valid, cfg);
  if (all.empty()) throw InputError("eval_ppl: no evaluable sentences");
  auto [total, count] = batch_nll(params, all, encoder_head_only);
  return std::exp(total / static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// the pre-training loop

struct PretrainOutput {
  ModelParams params;
  std::vector<ReportRow> rows;
  TrainStats stats;
};

// Runs mask-sample -> corrupt -> step. Two corpora alternate languages per
// step. BERT+LM runs the encoder-head phase for the first half of the steps,
// then the k=m decoder phase with the encoder frozen.
inline PretrainOutput pretrain(const std::vector<TokenizedCorpus>& corpora,
                               const ModelConfig& mcfg, const TrainConfig& tcfg) {
  if (corpora.empty()) throw InputError("pretrain: need at least one corpus");
  tcfg.validate();
  int longest = 0;
  for (const auto& c : corpora) {
    if (c.sentences.empty()) throw InputError("pretrain: a corpus has no usable sentences");
    for (const auto& s : c.sentences) longest = std::max(longest, static_cast<int>(s.size()));
  }
  if (tcfg.batch_tokens < longest) {
    throw ConfigError(strf("pretrain: batch_tokens %d below longest sentence %d",
                           tcfg.batch_tokens, longest));
  }
  if (longest > mcfg.max_positions) {
    throw ConfigError("pretrain: corpus sentence exceeds max_positions");
  }

  PretrainOutput out;
  out.params = init_params(mcfg, tcfg.seed);
  out.stats.batches_per_language.assign(corpora.size(), 0);

  std::vector<EvalSplit> splits;
  std::vector<TokenizedCorpus> train_corpora, valid_corpora;
  for (const auto& c : corpora) {
    EvalSplit s = split_corpus(c);
    TokenizedCorpus tr;
    tr.language = c.language;
    tr.sentences = std::move(s.train);
    TokenizedCorpus va;
    va.language = c.language;
    va.sentences = std::move(s.valid);
    train_corpora.push_back(std::move(tr));
    valid_corpora.push_back(std::move(va));
  }

  AdamState adam;
  adam.lr = tcfg.lr;
  adam.beta1 = tcfg.beta1;
  adam.beta2 = tcfg.beta2;
  adam.eps = tcfg.adam_eps;
  adam.init_for(out.params);

  CorruptPolicy policy;
  policy.vocab_size = mcfg.vocab_size;

  const bool bert = tcfg.objective == Objective::kBertLm;
  const int64_t phase1_steps = bert ? (tcfg.steps + 1) / 2 : 0;

  auto phase_cfg = [&](int64_t step) {
    TrainConfig c = tcfg;
    if (bert) {
      if (step < phase1_steps || tcfg.steps == 0) {
        c.k_one = true;  // encoder MLM phase
      } else {
        c.k_one = false;
        c.mask_ratio = 1.0;  // decoder LM phase
      }
    }
    return c;
  };

  auto record = [&](int64_t step, double train_loss) {
    ReportRow row;
    row.step = step;
    row.mode = objective_name(tcfg.objective);
    row.k_ratio = tcfg.k_ratio_label();
    row.train_loss = train_loss;
    bool phase1_eval = bert && (tcfg.steps == 0 || step < phase1_steps);
    TrainConfig ecfg = tcfg;
    if (bert) {
      ecfg.k_one = phase1_eval;
      if (!phase1_eval) ecfg.mask_ratio = 1.0;
    }
    row.valid_ppl = eval_ppl(out.params, valid_corpora, ecfg, phase1_eval);
    row.seed = tcfg.seed;
    out.rows.push_back(row);
  };

  {
    // initial row: probe loss on the first batch, no update
    TrainConfig c0 = phase_cfg(0);
    Batch probe = build_batch(train_corpora[0], c0, policy, objective_mask_mode(c0.objective), 0,
                              c0.keep_padding && !bert);
    auto [nll, count] = batch_nll(out.params, probe.examples, bert);
    record(0, nll / static_cast<double>(count));
  }

  Rng drop_rng(sub_seed(tcfg.seed, 0xD0));
  for (int64_t step = 0; step < tcfg.steps; ++step) {
    const TrainConfig c = phase_cfg(step);
    const bool phase1 = bert && step < phase1_steps;
    size_t lang = static_cast<size_t>(step % static_cast<int64_t>(train_corpora.size()));
    Batch batch = build_batch(train_corpora[lang], c, policy, objective_mask_mode(c.objective),
                              step, c.keep_padding && !bert);
    StepOptions opts;
    opts.encoder_head_only = phase1;
    opts.freeze_encoder = bert && !phase1;
    opts.clip_norm = tcfg.clip_norm;
    opts.dropout_rng = mcfg.dropout > 0.0 ? &drop_rng : nullptr;
    double loss = 0.0;
    try {
      loss = mass_step(out.params, batch.examples, adam, opts);
    } catch (const TrainAbortError& e) {
      std::string ids;
      for (size_t i = 0; i < batch.sentence_ids.size(); ++i) {
        if (i) ids += ",";
        ids += std::to_string(batch.sentence_ids[i]);
      }
      throw TrainAbortError(strf("%s at step %lld (lang %zu, sentences %s)", e.what(),
                                 static_cast<long long>(step), lang, ids.c_str()));
    }
    ++out.stats.steps;
    ++out.stats.batches_per_language[lang];
    out.stats.examples += static_cast<int64_t>(batch.examples.size());
    for (const auto& ex : batch.examples) {
      out.stats.target_tokens += ex.target_count();
      out.stats.decoder_tokens += phase1 ? 0 : static_cast<int64_t>(ex.decoder_input.size());
    }
    int64_t done = step + 1;
    if (done % tcfg.eval_every == 0 || done == tcfg.steps) record(done, loss);
  }
  return out;
}

inline std::vector<std::string> report_lines(const std::vector<ReportRow>& rows,
                                             const std::string& manifest_name = "") {
  std::vector<std::string> lines;
  if (!manifest_name.empty()) lines.push_back("# manifest: " + manifest_name);
  for (const auto& r : rows) lines.push_back(r.line());
  return lines;
}

}  // namespace mass
