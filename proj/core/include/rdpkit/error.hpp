// Copyright 2026 The rdp-kit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace rdp {

// Base for every error raised by the library. The CLI maps the subclasses
// onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A size guard was exceeded (exit code 3).
class GuardError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: NaN, unreachable DP step, divergence (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The tail of a proposal carries no mass, so no sample can be drawn from it.
// Callers fall back to K2 = 0 for that node.
class DegenerateTailError : public Error {
 public:
  DegenerateTailError() : Error("degenerate tail") {}
};

}  // namespace rdp
