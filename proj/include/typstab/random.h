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

// Seeded randomness shared by every stochastic operation in the library.
//
// Every operation takes an explicit 64-bit seed. Sub-draws obtain child seeds
// with DeriveSeed(seed, stream), so trials and sessions can run in any order
// or on any thread and still reproduce the same values.
//
// The generator is SplitMix64 (a Weyl counter passed through a fixed 64-bit
// finalizer). All transforms are written out here, not delegated to
// <random> distributions, whose outputs are implementation-defined:
//
//   Uniform()    = ((x >> 11) + 0.5) * 2^-53          in the open interval (0, 1)
//   Laplace(b)   = -b * sgn(u - 1/2) * ln(1 - 2|u - 1/2|)     (inverse CDF)
//   Normal()     = sqrt(-2 ln u1) * cos(2 pi u2)      (Box-Muller, cosine branch)
//
// Normal() consumes two uniforms per call; the sine branch is discarded.

#ifndef TYPSTAB_RANDOM_H_
#define TYPSTAB_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <span>

namespace typstab {

// The SplitMix64 output finalizer.
uint64_t Mix64(uint64_t x);

// Child seed for sub-stream `stream` of `seed`.
uint64_t DeriveSeed(uint64_t seed, uint64_t stream);

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t NextU64();
  // Uniform on (0, 1); never returns 0 or 1.
  double Uniform();
  // Centered Laplace draw with the given scale.
  double Laplace(double scale);
  // Standard normal draw.
  double Normal();
  bool Bernoulli(double p);
  // Index drawn from a normalized probability vector.
  size_t Categorical(std::span<const double> probabilities);

 private:
  uint64_t state_;
};

}  // namespace typstab

#endif  // TYPSTAB_RANDOM_H_
