// mfae/array.h

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

#ifndef MFAE_ARRAY_H_
#define MFAE_ARRAY_H_

#include <cmath>
#include <cstddef>
#include <vector>

#include "mfae/common.h"

namespace mfae {

// Dense row-major matrix.  Model storage uses the float instantiation;
// gradient checks run a parallel double path.
template <typename Real>
struct ArrayT {
  int rows = 0;
  int cols = 0;
  std::vector<Real> v;

  ArrayT() = default;
  ArrayT(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, Real(0)) {}

  Real &operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  Real operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  Real *Row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const Real *Row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

  size_t Size() const { return v.size(); }
  Real *Data() { return v.data(); }
  const Real *Data() const { return v.data(); }

  void SetZero() { std::fill(v.begin(), v.end(), Real(0)); }

  bool SameShape(const ArrayT &o) const { return rows == o.rows && cols == o.cols; }

  bool AllFinite() const {
    for (Real x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename Other>
  ArrayT<Other> Cast() const {
    ArrayT<Other> out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<Other>(v[i]);
    return out;
  }
};

using Array2 = ArrayT<float>;

template <typename Real>
std::vector<ArrayT<double>> CastArrays(const std::vector<ArrayT<Real>> &a) {
  std::vector<ArrayT<double>> out;
  out.reserve(a.size());
  for (const auto &x : a) out.push_back(x.template Cast<double>());
  return out;
}

}  // namespace mfae

#endif  // MFAE_ARRAY_H_
