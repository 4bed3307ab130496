// mfae/gradcheck.cc

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

#include "mfae/gradcheck.h"

#include <cmath>

#include "mfae/common.h"

namespace mfae {

double CheckGradients(const GradCheckFn &f,
                      const std::vector<ArrayT<double>> &params, uint64_t seed,
                      const GradCheckOptions &opts) {
  GradCheckEval base = f(params, true);
  MFAE_CHECK(std::isfinite(base.value), "non-finite loss at probe point");

  // Collect (array, element) coordinates of checkable entries.
  std::vector<std::pair<int, size_t>> coords;
  for (size_t a = 0; a < base.grads.size(); ++a)
    for (size_t i = 0; i < base.grads[a].v.size(); ++i)
      coords.emplace_back(static_cast<int>(a), i);
  MFAE_CHECK(!coords.empty(), "no gradients to check");

  Rng rng(seed);
  int probes = std::min<int>(opts.max_probes, static_cast<int>(coords.size()));
  // Sample without replacement via partial Fisher-Yates.
  for (int i = 0; i < probes; ++i) {
    int j = i + rng.UniformInt(static_cast<int>(coords.size()) - i);
    std::swap(coords[i], coords[j]);
  }

  std::vector<ArrayT<double>> work = params;
  double max_rel = 0;
  for (int p = 0; p < probes; ++p) {
    auto [a, i] = coords[p];
    double orig = work[a].v[i];
    work[a].v[i] = orig + opts.step;
    double up = f(work, false).value;
    work[a].v[i] = orig - opts.step;
    double down = f(work, false).value;
    work[a].v[i] = orig;
    MFAE_CHECK(std::isfinite(up) && std::isfinite(down),
               "non-finite loss at probe point");
    double fd = (up - down) / (2.0 * opts.step);
    double an = base.grads[a].v[i];
    double diff = std::abs(an - fd);
    double rel = diff <= opts.noise_tol
                     ? 0.0
                     : diff / std::max({std::abs(an), std::abs(fd), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace mfae
