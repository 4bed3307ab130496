// mfae/gradcheck.h

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

// Central finite-difference verification of analytic gradients, run in
// 64-bit precision.

#ifndef MFAE_GRADCHECK_H_
#define MFAE_GRADCHECK_H_

#include <functional>
#include <vector>

#include "mfae/array.h"
#include "mfae/rng.h"

namespace mfae {

struct GradCheckOptions {
  double step = 1e-4;
  int max_probes = 150;  // random subset of parameter entries
  // Absolute differences up to this are counted as a match.  Raise it for
  // objectives that are exactly invariant along some parameter directions:
  // the analytic gradient there is a true zero while the finite difference
  // returns rounding noise of the loss divided by 2*step.
  double noise_tol = 1e-8;
};

// value_and_grad(params, want_grads): returns the scalar and, when asked,
// d(scalar)/d(params) aligned with `params` (empty arrays are skipped).
struct GradCheckEval {
  double value = 0;
  std::vector<ArrayT<double>> grads;
};
using GradCheckFn =
    std::function<GradCheckEval(const std::vector<ArrayT<double>> &, bool)>;

// Max over probed entries of |analytic - central fd| / max(|analytic|,
// |fd|, 1e-8).  Throws on a non-finite value at the probe point.
double CheckGradients(const GradCheckFn &f,
                      const std::vector<ArrayT<double>> &params, uint64_t seed,
                      const GradCheckOptions &opts = {});

}  // namespace mfae

#endif  // MFAE_GRADCHECK_H_
