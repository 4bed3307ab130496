// mfae/rng.h

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

#ifndef MFAE_RNG_H_
#define MFAE_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>

#include "mfae/common.h"

namespace mfae {

// SplitMix64 finalizer; used to derive independent seed streams.
inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline uint64_t MixSeed(uint64_t a, uint64_t b) {
  return SplitMix64(a ^ SplitMix64(b));
}

inline uint64_t MixSeed(uint64_t a, uint64_t b, uint64_t c) {
  return MixSeed(MixSeed(a, b), c);
}

// Deterministic RNG. The variate transforms are implemented here rather
// than with std:: distributions, whose output is not pinned by the
// standard; the raw engine (mt19937_64) is fully specified.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t Raw() { return eng_(); }

  // Uniform on [0, 1).
  double Uniform() { return (Raw() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int UniformInt(int n) {
    MFAE_CHECK(n > 0, "UniformInt needs n > 0, got ", n);
    return static_cast<int>(Raw() % static_cast<uint64_t>(n));
  }

  // Standard normal via Box-Muller (no cached spare, so the stream
  // position is a simple function of the number of calls).
  double Gauss() {
    double u1 = ((Raw() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Gumbel(0,1) as -log(-log(u)), u clamped away from {0,1}.
  double Gumbel() {
    double u = Uniform();
    if (u < 1e-12) u = 1e-12;
    if (u > 1.0 - 1e-12) u = 1.0 - 1e-12;
    return -std::log(-std::log(u));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace mfae

#endif  // MFAE_RNG_H_
