// mfae/common.h

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

#ifndef MFAE_COMMON_H_
#define MFAE_COMMON_H_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mfae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (CLI exit code 65).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File I/O or format failure (CLI exit code 66).
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during optimization (CLI exit code 70).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

namespace internal {
inline void StrAppend(std::ostringstream &) {}
template <typename T, typename... Rest>
void StrAppend(std::ostringstream &os, const T &v, Rest &&...rest) {
  os << v;
  StrAppend(os, std::forward<Rest>(rest)...);
}
}  // namespace internal

template <typename... Args>
std::string StrCat(Args &&...args) {
  std::ostringstream os;
  internal::StrAppend(os, std::forward<Args>(args)...);
  return os.str();
}

#define MFAE_CHECK(cond, ...)                                            \
  do {                                                                   \
    if (!(cond))                                                         \
      throw ::mfae::Error(::mfae::StrCat("check failed (" #cond "): ",   \
                                         __VA_ARGS__));                  \
  } while (0)

}  // namespace mfae

#endif  // MFAE_COMMON_H_
