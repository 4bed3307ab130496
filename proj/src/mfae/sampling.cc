// mfae/sampling.cc

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

#include "mfae/sampling.h"

#include <cmath>

namespace mfae {

std::vector<float> GumbelMaxSample(std::span<const float> logits, Rng &rng) {
  MFAE_CHECK(!logits.empty(), "empty logits");
  int best = 0;
  double best_v = -1e300;
  for (size_t k = 0; k < logits.size(); ++k) {
    MFAE_CHECK(std::isfinite(logits[k]), "non-finite logit");
    double v = static_cast<double>(logits[k]) + rng.Gumbel();
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(k);
    }
  }
  std::vector<float> out(logits.size(), 0.0f);
  out[best] = 1.0f;
  return out;
}

std::vector<float> GumbelSoftmaxSample(std::span<const float> logits,
                                       double tau, Rng &rng) {
  MFAE_CHECK(!logits.empty(), "empty logits");
  MFAE_CHECK(tau > 0, "tau must be positive, got ", tau);
  std::vector<double> z(logits.size());
  double mx = -1e300;
  for (size_t k = 0; k < logits.size(); ++k) {
    MFAE_CHECK(std::isfinite(logits[k]), "non-finite logit");
    z[k] = (static_cast<double>(logits[k]) + rng.Gumbel()) / tau;
    mx = std::max(mx, z[k]);
  }
  double sum = 0;
  for (double &e : z) {
    e = std::exp(e - mx);
    sum += e;
  }
  std::vector<float> out(logits.size());
  for (size_t k = 0; k < z.size(); ++k)
    out[k] = static_cast<float>(z[k] / sum);
  return out;
}

}  // namespace mfae
