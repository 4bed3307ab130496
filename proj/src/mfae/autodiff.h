// mfae/autodiff.h

// Copyright 2026  The mfae authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode tape.  Ops compute their value eagerly at
// construction; Backward() replays the tape in reverse creation order,
// which is a valid reverse topological order by construction, visiting
// each node exactly once.

#ifndef MFAE_AUTODIFF_H_
#define MFAE_AUTODIFF_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfae/array.h"
#include "mfae/common.h"

namespace mfae {

template <typename Real>
class Tape {
 public:
  using Arr = ArrayT<Real>;
  using EMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<EMat>;
  using MapC = Eigen::Map<const EMat>;

  // Gradient-tracked input node.
  int Leaf(Arr value, bool needs_grad = true) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int Constant(Arr value) { return Leaf(std::move(value), false); }

  const Arr &Value(int id) const { return nodes_[id].value; }
  const Arr &Grad(int id) const { return nodes_[id].grad; }
  int NumNodes() const { return static_cast<int>(nodes_.size()); }

  // out = x * w + b (b broadcast over rows).  x: T x I, w: I x O, b: 1 x O.
  int Affine(int x, int w, int b) {
    const Arr &X = V(x), &W = V(w), &B = V(b);
    MFAE_CHECK(X.cols == W.rows, "affine: ", X.cols, " vs ", W.rows);
    MFAE_CHECK(B.rows == 1 && B.cols == W.cols, "affine bias shape");
    Arr out(X.rows, W.cols);
    MapM(out.Data(), out.rows, out.cols) =
        MapC(X.Data(), X.rows, X.cols) * MapC(W.Data(), W.rows, W.cols);
    for (int t = 0; t < out.rows; ++t)
      for (int j = 0; j < out.cols; ++j) out(t, j) += B(0, j);
    return Push(std::move(out), [this, x, w, b](int self) {
      const Arr &dy = G(self);
      const Arr &X = V(x), &W = V(w);
      MapM(MG(x).Data(), X.rows, X.cols).noalias() +=
          MapC(dy.Data(), dy.rows, dy.cols) *
          MapC(W.Data(), W.rows, W.cols).transpose();
      MapM(MG(w).Data(), W.rows, W.cols).noalias() +=
          MapC(X.Data(), X.rows, X.cols).transpose() *
          MapC(dy.Data(), dy.rows, dy.cols);
      Arr &db = MG(b);
      for (int t = 0; t < dy.rows; ++t)
        for (int j = 0; j < dy.cols; ++j) db(0, j) += dy(t, j);
    });
  }

  int Relu(int x) {
    Arr out = V(x);
    for (Real &e : out.v) e = e > Real(0) ? e : Real(0);
    return Push(std::move(out), [this, x](int self) {
      const Arr &dy = G(self), &X = V(x);
      Arr &dx = MG(x);
      for (size_t i = 0; i < dy.v.size(); ++i)
        if (X.v[i] > Real(0)) dx.v[i] += dy.v[i];
    });
  }

  // Per-feature batch norm over the rows of x, population statistics,
  // gamma/beta 1 x D.  Outputs batch mean/var through *mean_out/*var_out
  // when non-null (for running-stat updates done by the caller).
  int BatchNormTrain(int x, int gamma, int beta, Real eps,
                     Arr *mean_out = nullptr, Arr *var_out = nullptr) {
    const Arr &X = V(x);
    int T = X.rows, D = X.cols;
    Arr mean(1, D), var(1, D);
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) mean(0, d) += X(t, d);
    for (int d = 0; d < D; ++d) mean(0, d) /= T;
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) {
        Real c = X(t, d) - mean(0, d);
        var(0, d) += c * c;
      }
    for (int d = 0; d < D; ++d) var(0, d) /= T;
    if (mean_out) *mean_out = mean;
    if (var_out) *var_out = var;
    const Arr &Gm = V(gamma), &Bt = V(beta);
    Arr out(T, D);
    Arr istd(1, D);
    for (int d = 0; d < D; ++d) istd(0, d) = Real(1) / std::sqrt(var(0, d) + eps);
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d)
        out(t, d) = Gm(0, d) * (X(t, d) - mean(0, d)) * istd(0, d) + Bt(0, d);
    return Push(std::move(out),
                [this, x, gamma, beta, mean, istd](int self) {
      const Arr &dy = G(self), &X = V(x), &Gm = V(gamma);
      int T = X.rows, D = X.cols;
      Arr &dx = MG(x);
      Arr &dg = MG(gamma);
      Arr &db = MG(beta);
      // Standard batch-norm backward through the batch statistics.
      for (int d = 0; d < D; ++d) {
        Real is = istd(0, d), m = mean(0, d), g = Gm(0, d);
        Real sum_dy = 0, sum_dy_xhat = 0;
        for (int t = 0; t < T; ++t) {
          Real xhat = (X(t, d) - m) * is;
          sum_dy += dy(t, d);
          sum_dy_xhat += dy(t, d) * xhat;
        }
        dg(0, d) += sum_dy_xhat;
        db(0, d) += sum_dy;
        for (int t = 0; t < T; ++t) {
          Real xhat = (X(t, d) - m) * is;
          dx(t, d) += g * is / T * (T * dy(t, d) - sum_dy - xhat * sum_dy_xhat);
        }
      }
    });
  }

  int BatchNormInfer(int x, int gamma, int beta, const Arr &rmean,
                     const Arr &rvar, Real eps) {
    const Arr &X = V(x);
    int T = X.rows, D = X.cols;
    MFAE_CHECK(rmean.cols == D && rvar.cols == D, "bn infer stat shape");
    const Arr &Gm = V(gamma), &Bt = V(beta);
    Arr scale(1, D), shift(1, D);
    for (int d = 0; d < D; ++d) {
      scale(0, d) = Gm(0, d) / std::sqrt(rvar(0, d) + eps);
      shift(0, d) = Bt(0, d) - scale(0, d) * rmean(0, d);
    }
    Arr out(T, D);
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) out(t, d) = scale(0, d) * X(t, d) + shift(0, d);
    return Push(std::move(out), [this, x, gamma, beta, rmean, rvar, eps](int self) {
      const Arr &dy = G(self), &X = V(x), &Gm = V(gamma);
      int T = X.rows, D = X.cols;
      Arr &dx = MG(x);
      Arr &dg = MG(gamma);
      Arr &db = MG(beta);
      for (int d = 0; d < D; ++d) {
        Real is = Real(1) / std::sqrt(rvar(0, d) + eps);
        for (int t = 0; t < T; ++t) {
          dx(t, d) += dy(t, d) * Gm(0, d) * is;
          dg(0, d) += dy(t, d) * (X(t, d) - rmean(0, d)) * is;
          db(0, d) += dy(t, d);
        }
      }
    });
  }

  int SoftmaxRows(int x) {
    Arr out = V(x);
    for (int t = 0; t < out.rows; ++t) {
      Real *r = out.Row(t);
      Real mx = r[0];
      for (int j = 1; j < out.cols; ++j) mx = std::max(mx, r[j]);
      Real s = 0;
      for (int j = 0; j < out.cols; ++j) {
        r[j] = std::exp(r[j] - mx);
        s += r[j];
      }
      for (int j = 0; j < out.cols; ++j) r[j] /= s;
    }
    return Push(std::move(out), [this, x](int self) {
      const Arr &dy = G(self), &Y = V(self);
      Arr &dx = MG(x);
      for (int t = 0; t < Y.rows; ++t) {
        Real dot = 0;
        for (int j = 0; j < Y.cols; ++j) dot += dy(t, j) * Y(t, j);
        for (int j = 0; j < Y.cols; ++j)
          dx(t, j) += Y(t, j) * (dy(t, j) - dot);
      }
    });
  }

  int Softplus(int x) {
    Arr out = V(x);
    for (Real &e : out.v)
      e = std::max(e, Real(0)) + std::log1p(std::exp(-std::abs(e)));
    return Push(std::move(out), [this, x](int self) {
      const Arr &dy = G(self), &X = V(x);
      Arr &dx = MG(x);
      for (size_t i = 0; i < dy.v.size(); ++i) {
        Real s = Real(1) / (Real(1) + std::exp(-X.v[i]));
        dx.v[i] += dy.v[i] * s;
      }
    });
  }

  int ConcatCols(int a, int b) {
    const Arr &A = V(a), &B = V(b);
    MFAE_CHECK(A.rows == B.rows, "concat rows: ", A.rows, " vs ", B.rows);
    Arr out(A.rows, A.cols + B.cols);
    for (int t = 0; t < A.rows; ++t) {
      std::copy(A.Row(t), A.Row(t) + A.cols, out.Row(t));
      std::copy(B.Row(t), B.Row(t) + B.cols, out.Row(t) + A.cols);
    }
    return Push(std::move(out), [this, a, b](int self) {
      const Arr &dy = G(self);
      Arr &da = MG(a);
      Arr &db = MG(b);
      for (int t = 0; t < dy.rows; ++t) {
        for (int j = 0; j < da.cols; ++j) da(t, j) += dy(t, j);
        for (int j = 0; j < db.cols; ++j) db(t, j) += dy(t, da.cols + j);
      }
    });
  }

  int Add(int a, int b) {
    const Arr &A = V(a), &B = V(b);
    MFAE_CHECK(A.SameShape(B), "add shape mismatch");
    Arr out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += B.v[i];
    return Push(std::move(out), [this, a, b](int self) {
      const Arr &dy = G(self);
      Arr &da = MG(a);
      Arr &db = MG(b);
      for (size_t i = 0; i < dy.v.size(); ++i) {
        da.v[i] += dy.v[i];
        db.v[i] += dy.v[i];
      }
    });
  }

  int Sub(int a, int b) {
    const Arr &A = V(a), &B = V(b);
    MFAE_CHECK(A.SameShape(B), "sub shape mismatch");
    Arr out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= B.v[i];
    return Push(std::move(out), [this, a, b](int self) {
      const Arr &dy = G(self);
      Arr &da = MG(a);
      Arr &db = MG(b);
      for (size_t i = 0; i < dy.v.size(); ++i) {
        da.v[i] += dy.v[i];
        db.v[i] -= dy.v[i];
      }
    });
  }

  int Mul(int a, int b) {
    const Arr &A = V(a), &B = V(b);
    MFAE_CHECK(A.SameShape(B), "mul shape mismatch");
    Arr out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= B.v[i];
    return Push(std::move(out), [this, a, b](int self) {
      const Arr &dy = G(self);
      const Arr &A = V(a), &B = V(b);
      Arr &da = MG(a);
      Arr &db = MG(b);
      for (size_t i = 0; i < dy.v.size(); ++i) {
        da.v[i] += dy.v[i] * B.v[i];
        db.v[i] += dy.v[i] * A.v[i];
      }
    });
  }

  int Scale(int a, Real s) {
    Arr out = V(a);
    for (Real &e : out.v) e *= s;
    return Push(std::move(out), [this, a, s](int self) {
      const Arr &dy = G(self);
      Arr &da = MG(a);
      for (size_t i = 0; i < dy.v.size(); ++i) da.v[i] += dy.v[i] * s;
    });
  }

  int AddScalar(int a, Real s) {
    Arr out = V(a);
    for (Real &e : out.v) e += s;
    return Push(std::move(out), [this, a](int self) {
      const Arr &dy = G(self);
      Arr &da = MG(a);
      for (size_t i = 0; i < dy.v.size(); ++i) da.v[i] += dy.v[i];
    });
  }

  int Sqrt(int a) {
    Arr out = V(a);
    for (Real &e : out.v) e = std::sqrt(e);
    return Push(std::move(out), [this, a](int self) {
      const Arr &dy = G(self), &Y = V(self);
      Arr &da = MG(a);
      for (size_t i = 0; i < dy.v.size(); ++i)
        da.v[i] += dy.v[i] / (Real(2) * Y.v[i]);
    });
  }

  int Log(int a) {
    Arr out = V(a);
    for (Real &e : out.v) e = std::log(e);
    return Push(std::move(out), [this, a](int self) {
      const Arr &dy = G(self), &X = V(a);
      Arr &da = MG(a);
      for (size_t i = 0; i < dy.v.size(); ++i) da.v[i] += dy.v[i] / X.v[i];
    });
  }

  // TDNN context splicing with edge replication: out row t is the
  // concatenation of rows clamp(t + c) over the ordered offsets c.  With
  // `segments` (row counts of independent sequences stacked in x),
  // clamping stays inside each sequence; empty means a single sequence.
  int Splice(int x, const std::vector<int> &context,
             const std::vector<int> &segments = {}) {
    MFAE_CHECK(!context.empty(), "splice: empty context");
    const Arr &X = V(x);
    std::vector<int> starts = SegmentStarts(X.rows, segments);
    int D = X.cols, C = static_cast<int>(context.size());
    Arr out(X.rows, D * C);
    for (size_t s = 0; s + 1 < starts.size(); ++s)
      for (int t = starts[s]; t < starts[s + 1]; ++t)
        for (int j = 0; j < C; ++j) {
          int src = std::clamp(t + context[j], starts[s], starts[s + 1] - 1);
          std::copy(X.Row(src), X.Row(src) + D, out.Row(t) + j * D);
        }
    return Push(std::move(out), [this, x, context, starts](int self) {
      const Arr &dy = G(self);
      Arr &dx = MG(x);
      int D = dx.cols, C = static_cast<int>(context.size());
      for (size_t s = 0; s + 1 < starts.size(); ++s)
        for (int t = starts[s]; t < starts[s + 1]; ++t)
          for (int j = 0; j < C; ++j) {
            int src = std::clamp(t + context[j], starts[s], starts[s + 1] - 1);
            const Real *g = dy.Row(t) + j * D;
            Real *d = dx.Row(src);
            for (int k = 0; k < D; ++k) d[k] += g[k];
          }
    });
  }

  // Mean+std pooling over time, one output row per segment: T x D ->
  // B x 2D, population variance, std = sqrt(var + eps).  Empty `segments`
  // means a single segment spanning all rows.
  int StatsPool(int x, Real eps, const std::vector<int> &segments = {}) {
    const Arr &X = V(x);
    std::vector<int> starts = SegmentStarts(X.rows, segments);
    int B = static_cast<int>(starts.size()) - 1, D = X.cols;
    Arr out(B, 2 * D);
    for (int b = 0; b < B; ++b) {
      int lo = starts[b], T = starts[b + 1] - starts[b];
      for (int d = 0; d < D; ++d) {
        Real m = 0;
        for (int t = 0; t < T; ++t) m += X(lo + t, d);
        m /= T;
        Real v = 0;
        for (int t = 0; t < T; ++t) {
          Real c = X(lo + t, d) - m;
          v += c * c;
        }
        v /= T;
        out(b, d) = m;
        out(b, D + d) = std::sqrt(v + eps);
      }
    }
    return Push(std::move(out), [this, x, starts](int self) {
      const Arr &dy = G(self), &Y = V(self), &X = V(x);
      Arr &dx = MG(x);
      int B = static_cast<int>(starts.size()) - 1, D = X.cols;
      for (int b = 0; b < B; ++b) {
        int lo = starts[b], T = starts[b + 1] - starts[b];
        for (int d = 0; d < D; ++d) {
          Real m = Y(b, d), s = Y(b, D + d);
          Real dm = dy(b, d), ds = dy(b, D + d);
          for (int t = 0; t < T; ++t)
            dx(lo + t, d) += dm / T + ds * (X(lo + t, d) - m) / (T * s);
        }
      }
    });
  }

  // v: B x D -> sum(segments) x D; every row of segment b copies v row b.
  int RepeatRows(int v, const std::vector<int> &segments) {
    const Arr &Vv = V(v);
    MFAE_CHECK(static_cast<int>(segments.size()) == Vv.rows,
               "repeat_rows: segment count vs rows");
    std::vector<int> starts{0};
    for (int t : segments) {
      MFAE_CHECK(t >= 1, "repeat_rows: empty segment");
      starts.push_back(starts.back() + t);
    }
    Arr out(starts.back(), Vv.cols);
    for (int b = 0; b < Vv.rows; ++b)
      for (int t = starts[b]; t < starts[b + 1]; ++t)
        std::copy(Vv.Row(b), Vv.Row(b) + Vv.cols, out.Row(t));
    return Push(std::move(out), [this, v, starts](int self) {
      const Arr &dy = G(self);
      Arr &dv = MG(v);
      for (int b = 0; b < dv.rows; ++b)
        for (int t = starts[b]; t < starts[b + 1]; ++t)
          for (int j = 0; j < dv.cols; ++j) dv(b, j) += dy(t, j);
    });
  }

  // 1 x D -> T x D.
  int BroadcastRows(int v, int t_rows) {
    const Arr &Vv = V(v);
    MFAE_CHECK(Vv.rows == 1, "broadcast_rows needs a row vector");
    Arr out(t_rows, Vv.cols);
    for (int t = 0; t < t_rows; ++t)
      std::copy(Vv.Row(0), Vv.Row(0) + Vv.cols, out.Row(t));
    return Push(std::move(out), [this, v](int self) {
      const Arr &dy = G(self);
      Arr &dv = MG(v);
      for (int t = 0; t < dy.rows; ++t)
        for (int j = 0; j < dy.cols; ++j) dv(0, j) += dy(t, j);
    });
  }

  // a (T x K) minus column vector s (T x 1) broadcast across columns.
  int SubColVec(int a, int s) {
    const Arr &A = V(a), &S = V(s);
    MFAE_CHECK(S.cols == 1 && S.rows == A.rows, "sub_colvec shape");
    Arr out = A;
    for (int t = 0; t < A.rows; ++t)
      for (int j = 0; j < A.cols; ++j) out(t, j) -= S(t, 0);
    return Push(std::move(out), [this, a, s](int self) {
      const Arr &dy = G(self);
      Arr &da = MG(a);
      Arr &ds = MG(s);
      for (int t = 0; t < dy.rows; ++t)
        for (int j = 0; j < dy.cols; ++j) {
          da(t, j) += dy(t, j);
          ds(t, 0) -= dy(t, j);
        }
    });
  }

  // Row-wise log-sum-exp: T x K -> T x 1.
  int LogSumExpRows(int x) {
    const Arr &X = V(x);
    Arr out(X.rows, 1);
    for (int t = 0; t < X.rows; ++t) {
      const Real *r = X.Row(t);
      Real mx = r[0];
      for (int j = 1; j < X.cols; ++j) mx = std::max(mx, r[j]);
      Real s = 0;
      for (int j = 0; j < X.cols; ++j) s += std::exp(r[j] - mx);
      out(t, 0) = mx + std::log(s);
    }
    return Push(std::move(out), [this, x](int self) {
      const Arr &dy = G(self), &Y = V(self), &X = V(x);
      Arr &dx = MG(x);
      for (int t = 0; t < X.rows; ++t)
        for (int j = 0; j < X.cols; ++j)
          dx(t, j) += dy(t, 0) * std::exp(X(t, j) - Y(t, 0));
    });
  }

  int SumAll(int x) {
    const Arr &X = V(x);
    Arr out(1, 1);
    Real s = 0;
    for (Real e : X.v) s += e;
    out(0, 0) = s;
    return Push(std::move(out), [this, x](int self) {
      Real g = G(self)(0, 0);
      Arr &dx = MG(x);
      for (Real &e : dx.v) e += g;
    });
  }

  // Squared-error reduction: 1/2 * sum((a - b)^2) -> 1 x 1.
  int HalfSumSqDiff(int a, int b) {
    const Arr &A = V(a), &B = V(b);
    MFAE_CHECK(A.SameShape(B), "half_sum_sq_diff shape mismatch");
    Arr out(1, 1);
    Real s = 0;
    for (size_t i = 0; i < A.v.size(); ++i) {
      Real d = A.v[i] - B.v[i];
      s += d * d;
    }
    out(0, 0) = s / Real(2);
    return Push(std::move(out), [this, a, b](int self) {
      Real g = G(self)(0, 0);
      const Arr &A = V(a), &B = V(b);
      Arr &da = MG(a);
      Arr &db = MG(b);
      for (size_t i = 0; i < A.v.size(); ++i) {
        Real d = g * (A.v[i] - B.v[i]);
        da.v[i] += d;
        db.v[i] -= d;
      }
    });
  }

  // Accumulates d(out)/d(leaf) for every node into its grad buffer.
  void Backward(int out) {
    MFAE_CHECK(V(out).rows == 1 && V(out).cols == 1,
               "backward target must be scalar");
    for (auto &n : nodes_) {
      n.grad = Arr(n.value.rows, n.value.cols);
    }
    nodes_[out].grad(0, 0) = Real(1);
    for (int i = out; i >= 0; --i)
      if (nodes_[i].back) nodes_[i].back(i);
  }

  bool AllValuesFinite() const {
    for (const auto &n : nodes_)
      if (!n.value.AllFinite()) return false;
    return true;
  }

 private:
  struct Node {
    Arr value;
    Arr grad;
    std::function<void(int)> back;
    bool needs_grad = true;
  };

  // Prefix row offsets (size B + 1); empty `segments` means one segment
  // spanning all rows.
  static std::vector<int> SegmentStarts(int rows,
                                        const std::vector<int> &segments) {
    MFAE_CHECK(rows >= 1, "empty input");
    std::vector<int> starts{0};
    if (segments.empty()) {
      starts.push_back(rows);
      return starts;
    }
    for (int t : segments) {
      MFAE_CHECK(t >= 1, "empty segment");
      starts.push_back(starts.back() + t);
    }
    MFAE_CHECK(starts.back() == rows, "segments must cover the rows");
    return starts;
  }

  const Arr &V(int i) const { return nodes_[i].value; }
  const Arr &G(int i) const { return nodes_[i].grad; }
  Arr &MG(int i) { return nodes_[i].grad; }

  int Push(Arr value, std::function<void(int)> back) {
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
};

}  // namespace mfae

#endif  // MFAE_AUTODIFF_H_
