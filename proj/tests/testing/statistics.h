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

// Small statistical helpers for tests: one-sample Kolmogorov-Smirnov, exact
// binomial tails in long double, and numeric integration.

#ifndef TYPSTAB_TESTS_TESTING_STATISTICS_H_
#define TYPSTAB_TESTS_TESTING_STATISTICS_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace typstab::testing {

// sup_x |F_n(x) - F(x)|.
inline double KolmogorovSmirnov(std::vector<double> sample,
                                const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// Critical value at level 0.001 (asymptotic).
inline double KolmogorovSmirnovCritical(size_t n) {
  return 1.949 / std::sqrt(static_cast<double>(n));
}

// Pr[|Binomial(n, p) / n - p| > t], summed exactly.
inline long double BinomialDeviationTail(int n, long double p, long double t) {
  long double total = 0.0L;
  for (int s = 0; s <= n; ++s) {
    const long double log_pmf = std::lgamma(static_cast<long double>(n) + 1) -
                                std::lgamma(static_cast<long double>(s) + 1) -
                                std::lgamma(static_cast<long double>(n - s) + 1) +
                                s * std::log(p) + (n - s) * std::log1p(-p);
    if (std::fabs(static_cast<long double>(s) / n - p) > t) {
      total += std::exp(log_pmf);
    }
  }
  return total;
}

// Composite Simpson rule on [a, b] with `intervals` (even) pieces.
inline long double Simpson(const std::function<long double(long double)>& f,
                           long double a, long double b, int intervals) {
  const long double h = (b - a) / intervals;
  long double total = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) {
    total += (i % 2 ? 4.0L : 2.0L) * f(a + i * h);
  }
  return total * h / 3.0L;
}

}  // namespace typstab::testing

#endif  // TYPSTAB_TESTS_TESTING_STATISTICS_H_
