// Copyright 2026 The UFDA Simulator Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ufda {

// Root of every error thrown by the library. The CLI maps any of these to a
// nonzero exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, bad hyperparameter, or dimension mismatch.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside its admissible range (e.g. a schedule step past the end).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Zero vector normalization and similar degenerate numerical input.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, gradient, or parameter during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent message between clients.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// An internal invariant no longer holds (stale caches, broken simplex, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace ufda
