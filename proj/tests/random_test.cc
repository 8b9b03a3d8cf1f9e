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

#include "typstab/random.h"

#include <gtest/gtest.h>

#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <set>
#include <vector>

#include "testing/statistics.h"

namespace typstab {
namespace {

TEST(DeriveSeedTest, StreamsAreDistinct) {
  std::set<uint64_t> seen;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    for (uint64_t stream = 0; stream < 50; ++stream) {
      seen.insert(DeriveSeed(seed, stream));
    }
  }
  EXPECT_EQ(seen.size(), 2500u);
}

TEST(DeriveSeedTest, Deterministic) {
  EXPECT_EQ(DeriveSeed(7, 3), DeriveSeed(7, 3));
  EXPECT_NE(DeriveSeed(7, 3), DeriveSeed(3, 7));
}

TEST(RngTest, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
}

TEST(RngTest, UniformStaysInOpenInterval) {
  Rng rng(1);
  std::vector<double> sample;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.Uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sample.push_back(u);
  }
  const double d = testing::KolmogorovSmirnov(sample, [](double x) { return x; });
  EXPECT_LT(d, testing::KolmogorovSmirnovCritical(sample.size()));
}

TEST(RngTest, LaplaceMatchesDistribution) {
  const double scale = 2.5;
  Rng rng(2);
  std::vector<double> sample;
  for (int i = 0; i < 100000; ++i) sample.push_back(rng.Laplace(scale));
  const boost::math::laplace_distribution<double> dist(0.0, scale);
  const double d = testing::KolmogorovSmirnov(
      sample, [&](double x) { return boost::math::cdf(dist, x); });
  EXPECT_LT(d, testing::KolmogorovSmirnovCritical(sample.size()));
}

TEST(RngTest, NormalMatchesDistribution) {
  Rng rng(3);
  std::vector<double> sample;
  for (int i = 0; i < 100000; ++i) sample.push_back(rng.Normal());
  const boost::math::normal_distribution<double> dist(0.0, 1.0);
  const double d = testing::KolmogorovSmirnov(
      sample, [&](double x) { return boost::math::cdf(dist, x); });
  EXPECT_LT(d, testing::KolmogorovSmirnovCritical(sample.size()));
}

TEST(RngTest, CategoricalFrequencies) {
  const std::vector<double> p = {0.1, 0.0, 0.6, 0.3};
  Rng rng(4);
  std::vector<int> counts(p.size(), 0);
  const int trials = 200000;
  for (int i = 0; i < trials; ++i) ++counts[rng.Categorical(p)];
  EXPECT_EQ(counts[1], 0);
  for (size_t i = 0; i < p.size(); ++i) {
    const double sd = std::sqrt(p[i] * (1 - p[i]) / trials);
    EXPECT_NEAR(static_cast<double>(counts[i]) / trials, p[i], 5 * sd + 1e-12);
  }
}

TEST(RngTest, CategoricalNeverPicksZeroMassTail) {
  // Cumulative sum falls short of 1 by rounding.
  const std::vector<double> p = {0.1, 0.2, 0.7 - 1e-15, 0.0};
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) EXPECT_NE(rng.Categorical(p), 3u);
}

}  // namespace
}  // namespace typstab
