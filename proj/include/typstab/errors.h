//
// Copyright 2026 The Typstab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef TYPSTAB_ERRORS_H_
#define TYPSTAB_ERRORS_H_

#include <stdexcept>
#include <string>

namespace typstab {

// Base class for every error raised by the library. The module name is kept
// separately so front ends can report where a failure originated.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

// Malformed distribution, query or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A precondition on a function argument does not hold.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// The requested calibration or construction has no solution.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A component did not honour the stability parameters it declared.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace typstab

#endif  // TYPSTAB_ERRORS_H_
