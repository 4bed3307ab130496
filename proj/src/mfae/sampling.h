// mfae/sampling.h

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

// Categorical reparameterization: exact Gumbel-Max sampling and the
// Gumbel-Softmax relaxation.  Noise is added to raw logits; by shift
// invariance of softmax/argmax this equals adding it to log-probabilities.

#ifndef MFAE_SAMPLING_H_
#define MFAE_SAMPLING_H_

#include <span>
#include <vector>

#include "mfae/array.h"
#include "mfae/common.h"
#include "mfae/rng.h"

namespace mfae {

struct GumbelConfig {
  double tau = 0.1;
  uint64_t seed = 0;
};

// One-hot sample at argmax_k(logits_k + g_k), g_k i.i.d. Gumbel(0,1).
std::vector<float> GumbelMaxSample(std::span<const float> logits, Rng &rng);

// softmax((logits + g) / tau); sums to 1, differentiable in the logits.
std::vector<float> GumbelSoftmaxSample(std::span<const float> logits,
                                       double tau, Rng &rng);

// Matrix of i.i.d. Gumbel(0,1) noise (row-major fill order).
template <typename Real>
ArrayT<Real> SampleGumbelNoise(int rows, int cols, Rng &rng) {
  ArrayT<Real> g(rows, cols);
  for (auto &e : g.v) e = static_cast<Real>(rng.Gumbel());
  return g;
}

}  // namespace mfae

#endif  // MFAE_SAMPLING_H_
