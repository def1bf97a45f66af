// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0

#include "mass/tensor.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "testutil.hpp"

using mass::Tape;
using mass::Tensor;
using mass::Var;
using masstest::check_entries;
using masstest::rel_err;
using masstest::sample_entries;

namespace {

TEST(Tensor, ShapeInvariant) {
  Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6);
  EXPECT_THROW(Tensor({2, 0}), mass::DimensionError);
}

TEST(Matmul, IdentityCase) {
  Tape tape;
  Tensor id({2, 2});
  id.at(0, 0) = 1.0;
  id.at(1, 1) = 1.0;
  mass::Rng rng(1);
  Tensor x = Tensor::randn({2, 2}, rng);
  Var out = tape.matmul(tape.constant(id), tape.constant(x));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(tape.value(out)[i], x[i]);
}

TEST(Matmul, HandArithmetic) {
  Tape tape;
  Tensor a({2, 2});
  a.data = {1, 2, 3, 4};
  Tensor b({2, 1});
  b.data = {1, 1};
  Var out = tape.matmul(tape.constant(a), tape.constant(b));
  EXPECT_DOUBLE_EQ(tape.value(out)[0], 3.0);
  EXPECT_DOUBLE_EQ(tape.value(out)[1], 7.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({2, 3}));
  try {
    tape.matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const mass::DimensionError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2 x 3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradVsFiniteDifferences) {
  mass::Rng rng(7);
  Tensor a = Tensor::randn({3, 4}, rng);
  Tensor b = Tensor::randn({4, 2}, rng);
  auto loss = [&] {
    Tape t;
    return t.value(t.sum(t.matmul(t.leaf(a), t.leaf(b)))).item();
  };
  Tape t;
  Var va = t.leaf(a), vb = t.leaf(b);
  t.backward(t.sum(t.matmul(va, vb)));
  auto ra = check_entries(loss, a, t.grad(va), sample_entries(a.numel(), 8, rng), 1e-5, "a");
  auto rb = check_entries(loss, b, t.grad(vb), sample_entries(b.numel(), 8, rng), 1e-5, "b");
  EXPECT_LT(ra.max_rel_err, 1e-6) << ra.worst;
  EXPECT_LT(rb.max_rel_err, 1e-6) << rb.worst;
}

TEST(MatmulNT, MatchesMatmulWithTranspose) {
  mass::Rng rng(3);
  Tensor a = Tensor::randn({3, 5}, rng);
  Tensor b = Tensor::randn({4, 5}, rng);
  Tape t;
  Var va = t.constant(a), vb = t.constant(b);
  const Tensor& direct = t.value(t.matmul_nt(va, vb));
  const Tensor& viaT = t.value(t.matmul(va, t.transpose(vb)));
  for (int64_t i = 0; i < direct.numel(); ++i) EXPECT_DOUBLE_EQ(direct[i], viaT[i]);
}

TEST(MatmulNT, GradVsFiniteDifferences) {
  mass::Rng rng(11);
  Tensor a = Tensor::randn({3, 4}, rng);
  Tensor b = Tensor::randn({5, 4}, rng);
  auto loss = [&] {
    Tape t;
    auto y = t.matmul_nt(t.leaf(a), t.leaf(b));
    return t.value(t.sum(t.mul(y, y))).item();
  };
  Tape t;
  Var va = t.leaf(a), vb = t.leaf(b);
  auto y = t.matmul_nt(va, vb);
  t.backward(t.sum(t.mul(y, y)));
  auto ra = check_entries(loss, a, t.grad(va), sample_entries(a.numel(), 8, rng), 1e-5, "a");
  auto rb = check_entries(loss, b, t.grad(vb), sample_entries(b.numel(), 8, rng), 1e-5, "b");
  EXPECT_LT(ra.max_rel_err, 1e-5) << ra.worst;
  EXPECT_LT(rb.max_rel_err, 1e-5) << rb.worst;
}

TEST(Softmax, UniformRow) {
  Tape t;
  Var out = t.softmax(t.constant(Tensor({1, 4}, 3.7)), 1);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(t.value(out)[j], 0.25, 1e-15);
}

TEST(Softmax, AnalyticTwoEntry) {
  Tape t;
  Tensor x({1, 2});
  x.data = {0.0, std::log(3.0)};
  Var out = t.softmax(t.constant(x), 1);
  EXPECT_NEAR(t.value(out)[0], 0.25, 1e-14);
  EXPECT_NEAR(t.value(out)[1], 0.75, 1e-14);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  mass::Rng rng(5);
  Tensor x = Tensor::randn({6, 9}, rng, 4.0);
  Tape t;
  const Tensor& y = t.value(t.softmax(t.constant(x), 1));
  for (int i = 0; i < 6; ++i) {
    double s = 0.0;
    for (int j = 0; j < 9; ++j) {
      EXPECT_GE(y.at(i, j), 0.0);
      s += y.at(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  Tensor shifted = x;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 9; ++j) shifted.at(i, j) += 123.25;
  const Tensor& y2 = t.value(t.softmax(t.constant(shifted), 1));
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], y2[i], 1e-12);
}

TEST(Softmax, InvalidAxis) {
  Tape t;
  EXPECT_THROW(t.softmax(t.constant(Tensor({2, 2})), 2), mass::DimensionError);
}

TEST(Softmax, GradVsFiniteDifferences) {
  mass::Rng rng(13);
  Tensor x = Tensor::randn({3, 5}, rng);
  Tensor w = Tensor::randn({3, 5}, rng);  // weights make the loss non-trivial
  auto loss = [&] {
    Tape t;
    return t.value(t.sum(t.mul(t.softmax(t.leaf(x), 1), t.constant(w)))).item();
  };
  Tape t;
  Var vx = t.leaf(x);
  t.backward(t.sum(t.mul(t.softmax(vx, 1), t.constant(w))));
  auto r = check_entries(loss, x, t.grad(vx), sample_entries(x.numel(), 10, rng), 1e-5, "x");
  EXPECT_LT(r.max_rel_err, 1e-6) << r.worst;
}

TEST(Softmax, Axis0Grad) {
  mass::Rng rng(17);
  Tensor x = Tensor::randn({4, 3}, rng);
  Tensor w = Tensor::randn({4, 3}, rng);
  auto loss = [&] {
    Tape t;
    return t.value(t.sum(t.mul(t.softmax(t.leaf(x), 0), t.constant(w)))).item();
  };
  Tape t;
  Var vx = t.leaf(x);
  t.backward(t.sum(t.mul(t.softmax(vx, 0), t.constant(w))));
  auto r = check_entries(loss, x, t.grad(vx), sample_entries(x.numel(), 8, rng), 1e-5, "x");
  EXPECT_LT(r.max_rel_err, 1e-5) << r.worst;
}

TEST(CrossEntropy, UniformLogits) {
  Tape t;
  Var loss = t.cross_entropy(t.constant(Tensor({3, 16}, 0.42)), {1, 7, 15});
  EXPECT_NEAR(t.value(loss).item(), std::log(16.0), 1e-12);
}

TEST(CrossEntropy, OneHotMargin) {
  Tape t;
  Tensor logits({1, 4});
  logits.data = {20.0, 0.0, 0.0, 0.0};
  Var loss = t.cross_entropy(t.constant(logits), {0});
  EXPECT_LT(t.value(loss).item(), 1e-8);
  EXPECT_GT(t.value(loss).item(), 0.0);
}

TEST(CrossEntropy, AllIgnoredIsError) {
  Tape t;
  EXPECT_THROW(t.cross_entropy(t.constant(Tensor({2, 4})), {3, 3}, 3), mass::InputError);
}

TEST(CrossEntropy, TargetOutOfRange) {
  Tape t;
  EXPECT_THROW(t.cross_entropy(t.constant(Tensor({1, 4})), {4}), mass::IndexError);
}

TEST(CrossEntropy, IgnoreSkipsPositions) {
  mass::Rng rng(23);
  Tensor logits = Tensor::randn({4, 6}, rng);
  Tape t;
  double with_ignore = t.value(t.cross_entropy(t.constant(logits), {2, 5, 1, 5}, 5)).item();
  // hand: mean over rows 0 and 2 only
  Tensor two({2, 6});
  for (int j = 0; j < 6; ++j) {
    two.at(0, j) = logits.at(0, j);
    two.at(1, j) = logits.at(2, j);
  }
  double direct = t.value(t.cross_entropy(t.constant(two), {2, 1})).item();
  EXPECT_NEAR(with_ignore, direct, 1e-15);
}

TEST(CrossEntropy, GradVsFiniteDifferences) {
  mass::Rng rng(29);
  Tensor logits = Tensor::randn({5, 7}, rng);
  std::vector<int> targets = {1, 6, 0, 3, 3};
  auto loss = [&] {
    Tape t;
    return t.value(t.cross_entropy(t.leaf(logits), targets)).item();
  };
  Tape t;
  Var vl = t.leaf(logits);
  t.backward(t.cross_entropy(vl, targets));
  auto r =
      check_entries(loss, logits, t.grad(vl), sample_entries(logits.numel(), 12, rng), 1e-5, "l");
  EXPECT_LT(r.max_rel_err, 1e-5) << r.worst;
}

TEST(LayerNorm, GradVsFiniteDifferences) {
  mass::Rng rng(31);
  Tensor x = Tensor::randn({4, 8}, rng);
  Tensor g = Tensor::randn({8}, rng, 0.5);
  for (double& v : g.data) v += 1.0;
  Tensor b = Tensor::randn({8}, rng, 0.2);
  Tensor w = Tensor::randn({4, 8}, rng);
  auto loss = [&] {
    Tape t;
    auto y = t.layer_norm(t.leaf(x), t.leaf(g), t.leaf(b));
    return t.value(t.sum(t.mul(y, t.constant(w)))).item();
  };
  Tape t;
  Var vx = t.leaf(x), vg = t.leaf(g), vb = t.leaf(b);
  t.backward(t.sum(t.mul(t.layer_norm(vx, vg, vb), t.constant(w))));
  auto rx = check_entries(loss, x, t.grad(vx), sample_entries(x.numel(), 10, rng), 1e-5, "x");
  auto rg = check_entries(loss, g, t.grad(vg), sample_entries(g.numel(), 6, rng), 1e-5, "g");
  auto rb = check_entries(loss, b, t.grad(vb), sample_entries(b.numel(), 6, rng), 1e-5, "b");
  EXPECT_LT(rx.max_rel_err, 1e-5) << rx.worst;
  EXPECT_LT(rg.max_rel_err, 1e-5) << rg.worst;
  EXPECT_LT(rb.max_rel_err, 1e-5) << rb.worst;
}

TEST(GatherRows, RepeatedIdsAccumulate) {
  Tensor table({3, 2});
  table.data = {1, 2, 3, 4, 5, 6};
  Tape t;
  Var vt = t.leaf(table);
  Var out = t.gather_rows(vt, {1, 1, 2});
  t.backward(t.sum(out));
  const Tensor& g = t.grad(vt);
  EXPECT_DOUBLE_EQ(g.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.at(1, 0), 2.0);  // gathered twice
  EXPECT_DOUBLE_EQ(g.at(2, 0), 1.0);
}

TEST(GatherRows, OutOfRange) {
  Tape t;
  Var vt = t.constant(Tensor({3, 2}));
  EXPECT_THROW(t.gather_rows(vt, {3}), mass::IndexError);
}

TEST(SliceConcat, RoundTripAndGrad) {
  mass::Rng rng(37);
  Tensor x = Tensor::randn({3, 6}, rng);
  Tensor w = Tensor::randn({3, 6}, rng);
  auto loss = [&] {
    Tape t;
    Var vx = t.leaf(x);
    auto a = t.slice_cols(vx, 0, 2);
    auto b = t.slice_cols(vx, 2, 4);
    auto y = t.concat_cols({a, b});
    return t.value(t.sum(t.mul(y, t.constant(w)))).item();
  };
  Tape t;
  Var vx = t.leaf(x);
  auto y = t.concat_cols({t.slice_cols(vx, 0, 2), t.slice_cols(vx, 2, 4)});
  for (int64_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(t.value(y)[i], x[i]);
  t.backward(t.sum(t.mul(y, t.constant(w))));
  auto r = check_entries(loss, x, t.grad(vx), sample_entries(x.numel(), 8, rng), 1e-5, "x");
  EXPECT_LT(r.max_rel_err, 1e-5) << r.worst;
}

TEST(AddRowRelu, GradVsFiniteDifferences) {
  mass::Rng rng(41);
  Tensor x = Tensor::randn({4, 5}, rng);
  Tensor row = Tensor::randn({5}, rng);
  auto loss = [&] {
    Tape t;
    auto y = t.relu(t.add_row(t.leaf(x), t.leaf(row)));
    return t.value(t.sum(t.mul(y, y))).item();
  };
  Tape t;
  Var vx = t.leaf(x), vr = t.leaf(row);
  auto y = t.relu(t.add_row(vx, vr));
  t.backward(t.sum(t.mul(y, y)));
  auto rx = check_entries(loss, x, t.grad(vx), sample_entries(x.numel(), 8, rng), 1e-5, "x");
  auto rr = check_entries(loss, row, t.grad(vr), sample_entries(row.numel(), 5, rng), 1e-5, "r");
  EXPECT_LT(rx.max_rel_err, 1e-5) << rx.worst;
  EXPECT_LT(rr.max_rel_err, 1e-5) << rr.worst;
}

TEST(Backward, SumGivesOnes) {
  Tape t;
  Var w = t.leaf(Tensor({2, 3}, 0.5));
  t.backward(t.sum(w));
  for (int64_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(t.grad(w)[i], 1.0);
}

TEST(Backward, QuadraticAnalytic) {
  Tape t;
  Tensor w({3});
  w.data = {1, 2, 3};
  Var vw = t.leaf(w);
  t.backward(t.sum(t.mul(vw, vw)));
  EXPECT_DOUBLE_EQ(t.grad(vw)[0], 2.0);
  EXPECT_DOUBLE_EQ(t.grad(vw)[1], 4.0);
  EXPECT_DOUBLE_EQ(t.grad(vw)[2], 6.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tape t;
  Var w = t.leaf(Tensor({2, 2}, 1.0));
  EXPECT_THROW(t.backward(w), mass::ContractError);
}

TEST(Backward, UnreachableLeafZero) {
  Tape t;
  Var used = t.leaf(Tensor({2}, 1.0));
  Var unused = t.leaf(Tensor({3}, 1.0));
  t.backward(t.sum(used));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(t.grad(unused)[i], 0.0);
}

TEST(Backward, DeterministicBitForBit) {
  auto run = [] {
    mass::Rng rng(99);
    Tensor a = Tensor::randn({4, 4}, rng);
    Tensor b = Tensor::randn({4, 4}, rng);
    Tape t;
    Var va = t.leaf(a), vb = t.leaf(b);
    auto y = t.softmax(t.matmul(va, vb), 1);
    t.backward(t.sum(t.mul(y, y)));
    return std::make_pair(t.grad(va).data, t.grad(vb).data);
  };
  auto g1 = run();
  auto g2 = run();
  EXPECT_EQ(g1.first, g2.first);
  EXPECT_EQ(g1.second, g2.second);
}

}  // namespace
