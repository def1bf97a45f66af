// Copyright 2026 the masslab authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major float64 tensors plus a reverse-mode tape. The tape records
// one node per op in creation order (parents always precede children), so
// backward is a single reverse sweep with additive gradient accumulation.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "mass/common.hpp"
#include "mass/rng.hpp"

namespace mass {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? " x " : "") << s[i];
  os << "]";
  return os.str();
}

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {
    for (int d : shape) {
      if (d < 1) throw DimensionError("tensor dimension must be >= 1, got shape " + shape_str(shape));
    }
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, double v) { return Tensor(std::move(s), v); }
  static Tensor scalar(double v) { return Tensor({1}, v); }

  static Tensor randn(Shape s, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = rng.normal(0.0, stddev);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return rank() == 1 ? shape.at(0) : shape.at(1); }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  double item() const {
    if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape));
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// ---------------------------------------------------------------------------
// raw matmul kernels (ikj order, accumulate into out)

namespace detail {

// out[m x n] += a[m x k] * b[k x n]
inline void mm_acc(const double* a, const double* b, double* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* oi = out + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) oi[j] += av * bp[j];
    }
  }
}

// out[m x n] += a[m x k] * b[n x k]^T
inline void mm_nt_acc(const double* a, const double* b, double* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    double* oi = out + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      oi[j] += acc;
    }
  }
}

// out[k x n] += a[m x k]^T * b[m x n]
inline void mm_tn_acc(const double* a, const double* b, double* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    const double* bi = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      double av = ai[p];
      if (av == 0.0) continue;
      double* op = out + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) op[j] += av * bi[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// reverse-mode tape

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value) {
    Var v = push(std::move(value), true, {});
    leaves_.push_back(v.id);
    return v;
  }

  Var constant(Tensor value) { return push(std::move(value), false, {}); }

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }

  // Gradient of the last backward() w.r.t. v. Leaves untouched by the sweep
  // report zeros.
  const Tensor& grad(Var v) {
    Node& n = nodes_[check(v)];
    ensure_grad(n);
    return n.grad;
  }

  size_t size() const { return nodes_.size(); }

  // ---- ops ----

  Var matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_2d(ta, "matmul lhs");
    require_2d(tb, "matmul rhs");
    if (ta.shape[1] != tb.shape[0]) {
      throw DimensionError("matmul: inner dimensions disagree: " + shape_str(ta.shape) + " vs " +
                           shape_str(tb.shape));
    }
    int m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out({m, n});
    detail::mm_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    return push(std::move(out), requires_grad(a, b), {a.id, b.id},
                [a, b, m, k, n](Tape& t, int self) {
                  const Tensor& g = t.nodes_[self].grad;
                  if (t.wants_grad(a)) {
                    // dA += dC * B^T
                    detail::mm_nt_acc(g.data.data(), t.value(b).data.data(),
                                      t.grad_buf(a).data.data(), m, n, k);
                  }
                  if (t.wants_grad(b)) {
                    // dB += A^T * dC
                    detail::mm_tn_acc(t.value(a).data.data(), g.data.data(),
                                      t.grad_buf(b).data.data(), m, k, n);
                  }
                });
  }

  // a * b^T, with a [m x k], b [n x k]
  Var matmul_nt(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_2d(ta, "matmul_nt lhs");
    require_2d(tb, "matmul_nt rhs");
    if (ta.shape[1] != tb.shape[1]) {
      throw DimensionError("matmul_nt: inner dimensions disagree: " + shape_str(ta.shape) +
                           " vs " + shape_str(tb.shape));
    }
    int m = ta.shape[0], k = ta.shape[1], n = tb.shape[0];
    Tensor out({m, n});
    detail::mm_nt_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    return push(std::move(out), requires_grad(a, b), {a.id, b.id},
                [a, b, m, k, n](Tape& t, int self) {
                  const Tensor& g = t.nodes_[self].grad;
                  if (t.wants_grad(a)) {
                    // dA += dC * B
                    detail::mm_acc(g.data.data(), t.value(b).data.data(),
                                   t.grad_buf(a).data.data(), m, n, k);
                  }
                  if (t.wants_grad(b)) {
                    // dB += dC^T * A
                    detail::mm_tn_acc(g.data.data(), t.value(a).data.data(),
                                      t.grad_buf(b).data.data(), m, n, k);
                  }
                });
  }

  Var transpose(Var a) {
    const Tensor& ta = value(a);
    require_2d(ta, "transpose");
    int m = ta.shape[0], n = ta.shape[1];
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) out.at(j, i) = ta.at(i, j);
    return push(std::move(out), requires_grad(a), {a.id}, [a, m, n](Tape& t, int self) {
      if (!t.wants_grad(a)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& da = t.grad_buf(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) da.at(i, j) += g.at(j, i);
    });
  }

  Var add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
      throw DimensionError("add: shape mismatch: " + shape_str(ta.shape) + " vs " +
                           shape_str(tb.shape));
    }
    Tensor out = ta;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
    return push(std::move(out), requires_grad(a, b), {a.id, b.id}, [a, b](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.wants_grad(a)) {
        Tensor& da = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i];
      }
      if (t.wants_grad(b)) {
        Tensor& db = t.grad_buf(b);
        for (int64_t i = 0; i < g.numel(); ++i) db[i] += g[i];
      }
    });
  }

  // x [T x d] plus a broadcast row (shape [d] or [1 x d])
  Var add_row(Var x, Var row) {
    const Tensor& tx = value(x);
    const Tensor& tr = value(row);
    require_2d(tx, "add_row input");
    int T = tx.shape[0], d = tx.shape[1];
    if (tr.numel() != d) {
      throw DimensionError("add_row: row " + shape_str(tr.shape) + " does not match " +
                           shape_str(tx.shape));
    }
    Tensor out = tx;
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < d; ++j) out.at(i, j) += tr[j];
    return push(std::move(out), requires_grad(x, row), {x.id, row.id},
                [x, row, T, d](Tape& t, int self) {
                  const Tensor& g = t.nodes_[self].grad;
                  if (t.wants_grad(x)) {
                    Tensor& dx = t.grad_buf(x);
                    for (int64_t i = 0; i < g.numel(); ++i) dx[i] += g[i];
                  }
                  if (t.wants_grad(row)) {
                    Tensor& dr = t.grad_buf(row);
                    for (int i = 0; i < T; ++i)
                      for (int j = 0; j < d; ++j) dr[j] += g.at(i, j);
                  }
                });
  }

  Var mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
      throw DimensionError("mul: shape mismatch: " + shape_str(ta.shape) + " vs " +
                           shape_str(tb.shape));
    }
    Tensor out = ta;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
    return push(std::move(out), requires_grad(a, b), {a.id, b.id}, [a, b](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      if (t.wants_grad(a)) {
        Tensor& da = t.grad_buf(a);
        const Tensor& vb = t.value(b);
        for (int64_t i = 0; i < g.numel(); ++i) da[i] += g[i] * vb[i];
      }
      if (t.wants_grad(b)) {
        Tensor& db = t.grad_buf(b);
        const Tensor& va = t.value(a);
        for (int64_t i = 0; i < g.numel(); ++i) db[i] += g[i] * va[i];
      }
    });
  }

  Var scale(Var a, double c) {
    Tensor out = value(a);
    for (double& x : out.data) x *= c;
    return push(std::move(out), requires_grad(a), {a.id}, [a, c](Tape& t, int self) {
      if (!t.wants_grad(a)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& da = t.grad_buf(a);
      for (int64_t i = 0; i < g.numel(); ++i) da[i] += c * g[i];
    });
  }

  Var relu(Var a) {
    Tensor out = value(a);
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
    return push(std::move(out), requires_grad(a), {a.id}, [a](Tape& t, int self) {
      if (!t.wants_grad(a)) return;
      const Tensor& g = t.nodes_[self].grad;
      const Tensor& va = t.value(a);
      Tensor& da = t.grad_buf(a);
      for (int64_t i = 0; i < g.numel(); ++i) da[i] += va[i] > 0.0 ? g[i] : 0.0;
    });
  }

  // Max-subtracted softmax along `axis`. Works for any rank.
  Var softmax(Var a, int axis) {
    const Tensor& ta = value(a);
    if (axis < 0) axis += ta.rank();
    if (axis < 0 || axis >= ta.rank()) {
      throw DimensionError(strf("softmax: axis %d invalid for shape %s", axis,
                                shape_str(ta.shape).c_str()));
    }
    int len = ta.shape[axis];
    int64_t inner = 1;
    for (int i = axis + 1; i < ta.rank(); ++i) inner *= ta.shape[i];
    int64_t outer = ta.numel() / (len * inner);
    Tensor out = ta;
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t in = 0; in < inner; ++in) {
        double* base = out.data.data() + o * len * inner + in;
        double mx = base[0];
        for (int i = 1; i < len; ++i) mx = std::max(mx, base[static_cast<size_t>(i) * inner]);
        double sum = 0.0;
        for (int i = 0; i < len; ++i) {
          double e = std::exp(base[static_cast<size_t>(i) * inner] - mx);
          base[static_cast<size_t>(i) * inner] = e;
          sum += e;
        }
        for (int i = 0; i < len; ++i) base[static_cast<size_t>(i) * inner] /= sum;
      }
    }
    return push(std::move(out), requires_grad(a), {a.id},
                [a, len, inner, outer](Tape& t, int self) {
                  if (!t.wants_grad(a)) return;
                  const Tensor& y = t.nodes_[self].value;
                  const Tensor& g = t.nodes_[self].grad;
                  Tensor& da = t.grad_buf(a);
                  for (int64_t o = 0; o < outer; ++o) {
                    for (int64_t in = 0; in < inner; ++in) {
                      int64_t off = o * len * inner + in;
                      double dot = 0.0;
                      for (int i = 0; i < len; ++i) {
                        int64_t idx = off + static_cast<int64_t>(i) * inner;
                        dot += g[idx] * y[idx];
                      }
                      for (int i = 0; i < len; ++i) {
                        int64_t idx = off + static_cast<int64_t>(i) * inner;
                        da[idx] += (g[idx] - dot) * y[idx];
                      }
                    }
                  }
                });
  }

  // Per-row layer norm over the last dim of x [T x d], with gain/bias [d].
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Tensor& tx = value(x);
    require_2d(tx, "layer_norm input");
    int T = tx.shape[0], d = tx.shape[1];
    if (value(gain).numel() != d || value(bias).numel() != d) {
      throw DimensionError("layer_norm: gain/bias do not match feature dim " + shape_str(tx.shape));
    }
    Tensor out({T, d});
    auto mu = std::make_shared<std::vector<double>>(T);
    auto inv_std = std::make_shared<std::vector<double>>(T);
    const Tensor& g = value(gain);
    const Tensor& b = value(bias);
    for (int i = 0; i < T; ++i) {
      double m = 0.0;
      for (int j = 0; j < d; ++j) m += tx.at(i, j);
      m /= d;
      double v = 0.0;
      for (int j = 0; j < d; ++j) {
        double c = tx.at(i, j) - m;
        v += c * c;
      }
      v /= d;
      double is = 1.0 / std::sqrt(v + eps);
      (*mu)[i] = m;
      (*inv_std)[i] = is;
      for (int j = 0; j < d; ++j) out.at(i, j) = (tx.at(i, j) - m) * is * g[j] + b[j];
    }
    return push(std::move(out), requires_grad(x, gain, bias), {x.id, gain.id, bias.id},
                [x, gain, bias, T, d, mu, inv_std](Tape& t, int self) {
                  const Tensor& gy = t.nodes_[self].grad;
                  const Tensor& vx = t.value(x);
                  const Tensor& vg = t.value(gain);
                  for (int i = 0; i < T; ++i) {
                    double m = (*mu)[i], is = (*inv_std)[i];
                    if (t.wants_grad(gain) || t.wants_grad(bias)) {
                      Tensor& dg = t.grad_buf(gain);
                      Tensor& db = t.grad_buf(bias);
                      for (int j = 0; j < d; ++j) {
                        double xhat = (vx.at(i, j) - m) * is;
                        dg[j] += gy.at(i, j) * xhat;
                        db[j] += gy.at(i, j);
                      }
                    }
                    if (t.wants_grad(x)) {
                      Tensor& dx = t.grad_buf(x);
                      // dxhat = gy * gain; dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
                      double s1 = 0.0, s2 = 0.0;
                      for (int j = 0; j < d; ++j) {
                        double dxh = gy.at(i, j) * vg[j];
                        double xhat = (vx.at(i, j) - m) * is;
                        s1 += dxh;
                        s2 += dxh * xhat;
                      }
                      s1 /= d;
                      s2 /= d;
                      for (int j = 0; j < d; ++j) {
                        double dxh = gy.at(i, j) * vg[j];
                        double xhat = (vx.at(i, j) - m) * is;
                        dx.at(i, j) += is * (dxh - s1 - xhat * s2);
                      }
                    }
                  }
                });
  }

  // Row gather: out[i] = src[ids[i]]. Repeated ids accumulate additively on
  // backward, which is what shared embeddings need.
  Var gather_rows(Var src, std::vector<int> ids) {
    const Tensor& ts = value(src);
    require_2d(ts, "gather_rows source");
    int n = ts.shape[0], d = ts.shape[1];
    for (int id : ids) {
      if (id < 0 || id >= n) {
        throw IndexError(strf("gather_rows: row %d out of range [0, %d)", id, n));
      }
    }
    int T = static_cast<int>(ids.size());
    if (T == 0) throw DimensionError("gather_rows: empty id list");
    Tensor out({T, d});
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < d; ++j) out.at(i, j) = ts.at(ids[i], j);
    auto ids_p = std::make_shared<std::vector<int>>(std::move(ids));
    return push(std::move(out), requires_grad(src), {src.id}, [src, ids_p, d](Tape& t, int self) {
      if (!t.wants_grad(src)) return;
      const Tensor& g = t.nodes_[self].grad;
      Tensor& ds = t.grad_buf(src);
      for (size_t i = 0; i < ids_p->size(); ++i)
        for (int j = 0; j < d; ++j) ds.at((*ids_p)[i], j) += g.at(static_cast<int>(i), j);
    });
  }

  Var slice_cols(Var x, int begin, int count) {
    const Tensor& tx = value(x);
    require_2d(tx, "slice_cols input");
    int T = tx.shape[0], d = tx.shape[1];
    if (begin < 0 || count < 1 || begin + count > d) {
      throw DimensionError(strf("slice_cols: [%d, %d) out of range for %s", begin, begin + count,
                                shape_str(tx.shape).c_str()));
    }
    Tensor out({T, count});
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < count; ++j) out.at(i, j) = tx.at(i, begin + j);
    return push(std::move(out), requires_grad(x), {x.id},
                [x, begin, count, T](Tape& t, int self) {
                  if (!t.wants_grad(x)) return;
                  const Tensor& g = t.nodes_[self].grad;
                  Tensor& dx = t.grad_buf(x);
                  for (int i = 0; i < T; ++i)
                    for (int j = 0; j < count; ++j) dx.at(i, begin + j) += g.at(i, j);
                });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    int T = value(parts[0]).shape.at(0);
    int d = 0;
    bool rg = false;
    for (Var p : parts) {
      const Tensor& tp = value(p);
      require_2d(tp, "concat_cols part");
      if (tp.shape[0] != T) throw DimensionError("concat_cols: row counts differ");
      d += tp.shape[1];
      rg = rg || nodes_[check(p)].requires_grad;
    }
    Tensor out({T, d});
    int off = 0;
    std::vector<int> parents;
    for (Var p : parts) {
      const Tensor& tp = value(p);
      for (int i = 0; i < T; ++i)
        for (int j = 0; j < tp.shape[1]; ++j) out.at(i, off + j) = tp.at(i, j);
      off += tp.shape[1];
      parents.push_back(p.id);
    }
    auto parts_p = std::make_shared<std::vector<Var>>(parts);
    return push(std::move(out), rg, parents, [parts_p, T](Tape& t, int self) {
      const Tensor& g = t.nodes_[self].grad;
      int off = 0;
      for (Var p : *parts_p) {
        int w = t.value(p).shape[1];
        if (t.wants_grad(p)) {
          Tensor& dp = t.grad_buf(p);
          for (int i = 0; i < T; ++i)
            for (int j = 0; j < w; ++j) dp.at(i, j) += g.at(i, off + j);
        }
        off += w;
      }
    });
  }

  // Mean of -log softmax(logits)[t, targets[t]] over positions whose target
  // is not the ignore id. An all-ignored batch is an error, not zero.
  Var cross_entropy(Var logits, const std::vector<int>& targets,
                    std::optional<int> ignore = std::nullopt) {
    const Tensor& tl = value(logits);
    require_2d(tl, "cross_entropy logits");
    int T = tl.shape[0], V = tl.shape[1];
    if (static_cast<int>(targets.size()) != T) {
      throw DimensionError(strf("cross_entropy: %zu targets for %d logit rows", targets.size(), T));
    }
    auto used = std::make_shared<std::vector<int>>();
    for (int t = 0; t < T; ++t) {
      if (ignore && targets[t] == *ignore) continue;
      if (targets[t] < 0 || targets[t] >= V) {
        throw IndexError(strf("cross_entropy: target %d out of vocabulary range [0, %d)",
                              targets[t], V));
      }
      used->push_back(t);
    }
    if (used->empty()) {
      throw InputError("cross_entropy: every position carries the ignore id; no loss defined");
    }
    // cache probabilities for backward
    auto probs = std::make_shared<Tensor>(Shape{T, V});
    double loss = 0.0;
    for (int t : *used) {
      const double* row = tl.data.data() + static_cast<size_t>(t) * V;
      double mx = row[0];
      for (int j = 1; j < V; ++j) mx = std::max(mx, row[j]);
      double sum = 0.0;
      for (int j = 0; j < V; ++j) sum += std::exp(row[j] - mx);
      double lse = mx + std::log(sum);
      for (int j = 0; j < V; ++j) probs->at(t, j) = std::exp(row[j] - lse);
      loss -= row[targets[t]] - lse;
    }
    loss /= static_cast<double>(used->size());
    auto tgt = std::make_shared<std::vector<int>>(targets);
    return push(Tensor::scalar(loss), requires_grad(logits), {logits.id},
                [logits, used, probs, tgt, V](Tape& t, int self) {
                  if (!t.wants_grad(logits)) return;
                  double g = t.nodes_[self].grad[0] / static_cast<double>(used->size());
                  Tensor& dl = t.grad_buf(logits);
                  for (int r : *used) {
                    for (int j = 0; j < V; ++j) dl.at(r, j) += g * probs->at(r, j);
                    dl.at(r, (*tgt)[r]) -= g;
                  }
                });
  }

  Var sum(Var a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double x : ta.data) s += x;
    return push(Tensor::scalar(s), requires_grad(a), {a.id}, [a](Tape& t, int self) {
      if (!t.wants_grad(a)) return;
      double g = t.nodes_[self].grad[0];
      Tensor& da = t.grad_buf(a);
      for (int64_t i = 0; i < da.numel(); ++i) da[i] += g;
    });
  }

  // ---- backward ----

  void backward(Var loss) {
    Node& ln = nodes_[check(loss)];
    if (ln.value.numel() != 1) {
      throw ContractError("backward: loss must be scalar, got " + shape_str(ln.value.shape));
    }
    ensure_grad(ln);
    ln.grad[0] += 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.back || n.grad.numel() == 0) continue;
      n.back(*this, i);
    }
    // unreachable leaves report zeros
    for (int id : leaves_) ensure_grad(nodes_[id]);
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    bool requires_grad = false;
    std::vector<int> parents;
    std::function<void(Tape&, int)> back;
  };

  int check(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
      throw ContractError("invalid tape variable");
    }
    return v.id;
  }

  static void require_2d(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
      throw DimensionError(std::string(what) + " must be 2-d, got " + shape_str(t.shape));
    }
  }

  bool requires_grad(Var a) { return nodes_[check(a)].requires_grad; }
  bool requires_grad(Var a, Var b) { return requires_grad(a) || requires_grad(b); }
  bool requires_grad(Var a, Var b, Var c) { return requires_grad(a, b) || requires_grad(c); }

  bool wants_grad(Var v) { return nodes_[check(v)].requires_grad; }

  void ensure_grad(Node& n) {
    if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape);
  }

  Tensor& grad_buf(Var v) {
    Node& n = nodes_[check(v)];
    ensure_grad(n);
    return n.grad;
  }

  Var push(Tensor value, bool rg, std::vector<int> parents,
           std::function<void(Tape&, int)> back = nullptr) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = rg;
    n.parents = std::move(parents);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  std::vector<int> leaves_;
};

}  // namespace mass
