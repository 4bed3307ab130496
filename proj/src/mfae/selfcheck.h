// mfae/selfcheck.h

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

// Built-in invariant suites: finite-difference gradient checks for every
// primitive and the composed loss, closed-form KL vs Monte-Carlo,
// categorical sampler distribution tests, and the Jensen inequality
// relating per-frame posteriors to their average.

#ifndef MFAE_SELFCHECK_H_
#define MFAE_SELFCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

namespace mfae {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;  // one-line diagnostic (max error, statistic, ...)
};

SuiteResult CheckGradientSuite(uint64_t seed);
SuiteResult CheckKlSuite(uint64_t seed);
SuiteResult CheckSamplerSuite(uint64_t seed);
SuiteResult CheckKlJensenSuite(uint64_t seed);

// All four suites, in the order above.
std::vector<SuiteResult> RunSelfcheck(uint64_t seed);

}  // namespace mfae

#endif  // MFAE_SELFCHECK_H_
