// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0

#include "mass/masking.hpp"

#include <set>

#include "gtest/gtest.h"

using namespace mass;

namespace {

CorruptPolicy policy(double p_mask = 0.8, double p_random = 0.1) {
  CorruptPolicy p;
  p.vocab_size = 100;
  p.p_mask = p_mask;
  p.p_random = p_random;
  return p;
}

CorruptPolicy force_mask() { return policy(1.0, 0.0); }

std::vector<int> sentence(int m, int base = 10) {
  std::vector<int> t(m);
  for (int i = 0; i < m; ++i) t[i] = base + i;
  return t;
}

TEST(SampleSpan, HalfOfEightIsFour) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    Span s = sample_span(8, 0.5, rng);
    EXPECT_EQ(s.len(), 4);
    EXPECT_GE(s.u, 0);
    EXPECT_LE(s.v, 7);
  }
  // the Figure-1 instance: u=2 covers 1-based tokens 3..6
  Span fig{2, 5};
  EXPECT_EQ(fig.len(), 4);
}

TEST(SampleSpan, DegenerateSingleToken) {
  Rng rng(2);
  Span s = sample_span(1, 0.37, rng);
  EXPECT_EQ(s.u, 0);
  EXPECT_EQ(s.v, 0);
}

TEST(SampleSpan, FullRatioIsWholeSentence) {
  Rng rng(3);
  Span s = sample_span(10, 1.0, rng);
  EXPECT_EQ(s.u, 0);
  EXPECT_EQ(s.v, 9);
}

TEST(SampleSpan, LengthFormulaForAllM) {
  Rng rng(4);
  for (int m = 1; m <= 128; ++m) {
    int expect_k = std::max(1, std::min(static_cast<int>(std::floor(0.5 * m + 0.5)), m));
    Span s = sample_span(m, 0.5, rng);
    EXPECT_EQ(s.len(), expect_k) << "m=" << m;
  }
}

TEST(SampleSpan, StartUniformOverValidRange) {
  Rng rng(5);
  const int m = 8, k = 4;  // u in [0, 4]
  std::vector<int> counts(m - k + 1, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    Span s = sample_span(m, 0.5, rng);
    ++counts[s.u];
  }
  for (int u = 0; u <= m - k; ++u) {
    EXPECT_NEAR(counts[u] / static_cast<double>(n), 1.0 / (m - k + 1), 0.01) << "u=" << u;
  }
}

TEST(SampleSpan, InvalidArgs) {
  Rng rng(6);
  EXPECT_THROW(sample_span(0, 0.5, rng), InputError);
  EXPECT_THROW(sample_span(4, 0.0, rng), InputError);
  EXPECT_THROW(sample_span(4, 1.5, rng), InputError);
}

TEST(CorruptEncoder, ForcedMaskBranchMasksWholeSpan) {
  Rng rng(7);
  auto toks = sentence(8);
  auto out = corrupt_encoder(toks, {2, 5}, rng, force_mask());
  for (int i = 0; i < 8; ++i) {
    if (i >= 2 && i <= 5)
      EXPECT_EQ(out[i], special::kMask) << i;
    else
      EXPECT_EQ(out[i], toks[i]) << i;
  }
}

TEST(CorruptEncoder, WholeSentenceSpanAllMask) {
  Rng rng(8);
  auto toks = sentence(6);
  auto out = corrupt_encoder(toks, {0, 5}, rng, force_mask());
  for (int v : out) EXPECT_EQ(v, special::kMask);
}

TEST(CorruptEncoder, OutsideSpanUntouched) {
  Rng rng(9);
  auto toks = sentence(12);
  auto out = corrupt_encoder(toks, {3, 7}, rng, policy());
  for (int i = 0; i < 12; ++i) {
    if (i < 3 || i > 7) EXPECT_EQ(out[i], toks[i]);
  }
}

TEST(CorruptEncoder, BranchFrequencies80_10_10) {
  Rng rng(10);
  CorruptPolicy p = policy();
  const int n = 100000;
  int masked = 0, randomized = 0, unchanged = 0;
  for (int i = 0; i < n; ++i) {
    int c = corrupt_token(42, rng, p);
    if (c == p.mask_id)
      ++masked;
    else if (c == -1)
      ++unchanged;
    else {
      ++randomized;
      EXPECT_GE(c, p.first_normal_id);
      EXPECT_LT(c, p.vocab_size);
    }
  }
  EXPECT_NEAR(masked / static_cast<double>(n), 0.8, 0.01);
  EXPECT_NEAR(randomized / static_cast<double>(n), 0.1, 0.01);
  EXPECT_NEAR(unchanged / static_cast<double>(n), 0.1, 0.01);
}

TEST(BuildExample, FigureOneInstance) {
  // x1..x8 with the fragment x3 x4 x5 x6 masked (0-based span [2, 5])
  auto toks = sentence(8, 10);  // ids 10..17 stand in for x1..x8
  Rng rng(11);
  MaskedExample ex = build_example(toks, {2, 5}, rng, MaskMode::kMass, force_mask());
  EXPECT_EQ(ex.decoder_input, (std::vector<int>{special::kMask, 12, 13, 14}));
  EXPECT_EQ(ex.decoder_positions, (std::vector<int>{2, 3, 4, 5}));
  EXPECT_EQ(ex.targets, (std::vector<int>{12, 13, 14, 15}));
  for (int i = 2; i <= 5; ++i) EXPECT_EQ(ex.encoder_input[i], special::kMask);
  EXPECT_EQ(ex.encoder_input[0], 10);
  EXPECT_EQ(ex.encoder_input[6], 16);
}

TEST(BuildExample, KEqualsOneIsMlmCase) {
  auto toks = sentence(6);
  Rng rng(12);
  MaskedExample ex = build_example(toks, {3, 3}, rng, MaskMode::kMass, force_mask());
  EXPECT_EQ(ex.decoder_input, (std::vector<int>{special::kMask}));
  EXPECT_EQ(ex.decoder_positions, (std::vector<int>{3}));
  EXPECT_EQ(ex.targets, (std::vector<int>{toks[3]}));
}

TEST(BuildExample, KEqualsMIsLmCase) {
  auto toks = sentence(5);
  Rng rng(13);
  MaskedExample ex = build_example(toks, {0, 4}, rng, MaskMode::kMass, force_mask());
  EXPECT_EQ(ex.decoder_input, (std::vector<int>{special::kMask, toks[0], toks[1], toks[2], toks[3]}));
  EXPECT_EQ(ex.targets, toks);
  for (int v : ex.encoder_input) EXPECT_EQ(v, special::kMask);
}

TEST(BuildExample, MassCountsAgree) {
  auto toks = sentence(10);
  Rng rng(14);
  MaskedExample ex = build_example(toks, sample_span(10, 0.5, rng), rng, MaskMode::kMass,
                                   force_mask());
  int corrupted = 0;
  for (int i = 0; i < 10; ++i)
    if (ex.encoder_input[i] != toks[i]) ++corrupted;
  EXPECT_EQ(corrupted, ex.span.len());
  EXPECT_EQ(ex.target_count(), ex.span.len());
  EXPECT_EQ(static_cast<int>(ex.decoder_input.size()), ex.span.len());
}

TEST(BuildExample, PositionsStrictlyIncreasingAndMatchTargets) {
  auto toks = sentence(12);
  for (MaskMode mode : {MaskMode::kMass, MaskMode::kDiscrete}) {
    Rng rng(15);
    MaskedExample ex = build_example(toks, {4, 9}, rng, mode, policy());
    for (size_t i = 0; i + 1 < ex.decoder_positions.size(); ++i) {
      EXPECT_LT(ex.decoder_positions[i], ex.decoder_positions[i + 1]);
    }
    for (size_t i = 0; i < ex.targets.size(); ++i) {
      EXPECT_EQ(ex.targets[i], toks[ex.decoder_positions[i]]) << mode_name(mode);
    }
  }
}

TEST(BuildExample, DiscreteScattersKPositions) {
  auto toks = sentence(16);
  Rng rng(16);
  MaskedExample ex = build_example(toks, {0, 7}, rng, MaskMode::kDiscrete, force_mask());
  EXPECT_EQ(ex.decoder_positions.size(), 8u);
  std::set<int> pos(ex.decoder_positions.begin(), ex.decoder_positions.end());
  EXPECT_EQ(pos.size(), 8u);
  // encoder masked exactly at the chosen positions
  for (int i = 0; i < 16; ++i) {
    if (pos.count(i))
      EXPECT_EQ(ex.encoder_input[i], special::kMask);
    else
      EXPECT_EQ(ex.encoder_input[i], toks[i]);
  }
  // decoder inputs are the preceding masked-position tokens
  EXPECT_EQ(ex.decoder_input[0], special::kMask);
  for (size_t i = 1; i < ex.decoder_input.size(); ++i) {
    EXPECT_EQ(ex.decoder_input[i], toks[ex.decoder_positions[i - 1]]);
  }
}

TEST(BuildExample, FeedTargetCountEqualsMassK) {
  auto toks = sentence(9);
  Span span{2, 6};
  Rng r1(17), r2(17);
  MaskedExample mass_ex = build_example(toks, span, r1, MaskMode::kMass, policy());
  MaskedExample feed_ex = build_example(toks, span, r2, MaskMode::kFeed, policy());
  EXPECT_EQ(feed_ex.target_count(), mass_ex.span.len());
  EXPECT_EQ(feed_ex.decoder_input.size(), toks.size());
  EXPECT_EQ(feed_ex.decoder_input[0], special::kBos);
  for (size_t i = 1; i < toks.size(); ++i) EXPECT_EQ(feed_ex.decoder_input[i], toks[i - 1]);
  for (int i = 0; i < 9; ++i) {
    if (i >= 2 && i <= 6)
      EXPECT_EQ(feed_ex.targets[i], toks[i]);
    else
      EXPECT_EQ(feed_ex.targets[i], special::kPad);
  }
}

TEST(BuildExample, KeepPaddingLayout) {
  auto toks = sentence(8);
  Rng rng(18);
  MaskedExample ex = build_example(toks, {2, 5}, rng, MaskMode::kMass, force_mask(), true);
  ASSERT_EQ(ex.decoder_input.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    if (i > 2 && i <= 5)
      EXPECT_EQ(ex.decoder_input[i], toks[i - 1]) << i;
    else
      EXPECT_EQ(ex.decoder_input[i], special::kMask) << i;
    EXPECT_EQ(ex.decoder_positions[i], i);
    if (i >= 2 && i <= 5)
      EXPECT_EQ(ex.targets[i], toks[i]);
    else
      EXPECT_EQ(ex.targets[i], special::kPad);
  }
  EXPECT_EQ(ex.target_count(), 4);
}

TEST(BuildExample, DaeReconstructsFullSentence) {
  auto toks = sentence(10);
  Rng rng(19);
  MaskedExample ex = build_example(toks, {0, 0}, rng, MaskMode::kDae, policy());
  EXPECT_EQ(ex.targets, toks);
  EXPECT_EQ(ex.decoder_input[0], special::kBos);
  EXPECT_LE(ex.encoder_input.size(), toks.size());
  EXPECT_FALSE(ex.encoder_input.empty());
}

TEST(BuildExample, DaeNoiseRates) {
  auto toks = sentence(20);
  Rng rng(20);
  int dropped = 0, masked = 0, kept = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    MaskedExample ex = build_example(toks, {0, 0}, rng, MaskMode::kDae, policy());
    dropped += 20 - static_cast<int>(ex.encoder_input.size());
    for (int v : ex.encoder_input) {
      if (v == special::kMask)
        ++masked;
      else
        ++kept;
    }
  }
  double total = 20.0 * trials;
  EXPECT_NEAR(dropped / total, 0.1, 0.01);
  EXPECT_NEAR(masked / total, 0.1, 0.01);
  EXPECT_NEAR(kept / total, 0.8, 0.01);
}

TEST(BuildExample, DeterministicGivenSeed) {
  auto toks = sentence(14);
  for (MaskMode mode : {MaskMode::kMass, MaskMode::kDiscrete, MaskMode::kFeed, MaskMode::kDae}) {
    Rng r1(77), r2(77);
    MaskedExample a = build_example(toks, {3, 9}, r1, mode, policy());
    MaskedExample b = build_example(toks, {3, 9}, r2, mode, policy());
    EXPECT_EQ(a.encoder_input, b.encoder_input) << mode_name(mode);
    EXPECT_EQ(a.decoder_input, b.decoder_input) << mode_name(mode);
    EXPECT_EQ(a.decoder_positions, b.decoder_positions) << mode_name(mode);
    EXPECT_EQ(a.targets, b.targets) << mode_name(mode);
  }
}

TEST(BuildExample, InvalidSpanRejected) {
  Rng rng(21);
  EXPECT_THROW(build_example({}, {0, 0}, rng, MaskMode::kMass, policy()), InputError);
  EXPECT_THROW(build_example(sentence(4), {2, 4}, rng, MaskMode::kMass, policy()), InputError);
}

TEST(ExampleRecord, ContainsFields) {
  auto toks = sentence(4);
  Rng rng(22);
  MaskedExample ex = build_example(toks, {1, 2}, rng, MaskMode::kMass, force_mask());
  std::string rec = example_record(ex);
  EXPECT_NE(rec.find("mode=MASS"), std::string::npos);
  EXPECT_NE(rec.find("span=1:2"), std::string::npos);
  EXPECT_NE(rec.find("tgt=11,12"), std::string::npos);
}

}  // namespace
