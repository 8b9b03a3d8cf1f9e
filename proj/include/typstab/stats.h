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

#ifndef TYPSTAB_STATS_H_
#define TYPSTAB_STATS_H_

#include <cstddef>
#include <cstdint>
#include <functional>

namespace typstab {

// Standard normal CDF and upper tail.
double NormalCdf(double x);
double NormalSurvival(double x);

// Standard error of a binomial proportion p estimated from `trials` draws.
double BinomialSigma(double p, int64_t trials);

// Welford running mean and variance.
class RunningMoments {
 public:
  void Add(double x);
  // Merges another accumulator (Chan et al. pairwise update).
  void Merge(const RunningMoments& other);

  int64_t count() const { return count_; }
  double mean() const { return mean_; }
  // Unbiased sample variance; zero with fewer than two samples.
  double variance() const;
  double standard_error() const;

 private:
  int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Runs body(i) for i in [0, count) on up to `threads` worker threads using a
// static contiguous partition. The first exception thrown by any worker is
// rethrown on the caller's thread. Results must be written to per-index slots
// for the output to be independent of the thread count.
void ParallelFor(size_t count, int threads,
                 const std::function<void(size_t)>& body);

}  // namespace typstab

#endif  // TYPSTAB_STATS_H_
