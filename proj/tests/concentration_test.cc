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

#include "typstab/concentration.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "typstab/errors.h"

namespace typstab {
namespace {

using F = ConcentrationFunction;

// Closed forms in long double, written independently of the library.
long double McDiarmidGamma(long double a, long double n, long double d) {
  return 2 * a * a / (n * d * d);
}
long double SubgaussianGamma(long double a, long double s) {
  return a * a / (2 * s * s);
}
long double SubexpGamma(long double a, long double s, long double b,
                        bool as_stated) {
  const long double q = a * a / (2 * s * s);
  return std::min(q, as_stated ? s * s / (2 * b * b) : a / (2 * b));
}

TEST(GammaTest, ClosedFormsMatchOracle) {
  for (double a : {0.0, 0.01, 0.3, 1.0, 2.5, 17.0}) {
    EXPECT_NEAR(F::McDiarmid(0.1, 50).Gamma(a), McDiarmidGamma(a, 50, 0.1),
                1e-14 * (1 + McDiarmidGamma(a, 50, 0.1)));
    EXPECT_NEAR(F::Subgaussian(0.7).Gamma(a), SubgaussianGamma(a, 0.7),
                1e-14 * (1 + SubgaussianGamma(a, 0.7)));
    EXPECT_NEAR(F::Subexponential(1.5, 0.4).Gamma(a),
                SubexpGamma(a, 1.5, 0.4, true), 1e-14);
    EXPECT_NEAR(F::Subexponential(1.5, 0.4, SubexponentialVariant::kStandardBernstein)
                    .Gamma(a),
                SubexpGamma(a, 1.5, 0.4, false), 1e-14);
  }
}

TEST(GammaTest, RejectsNegativeAlpha) {
  EXPECT_THROW(F::Subgaussian(1).Gamma(-0.1), ArgumentError);
}

TEST(GammaTest, ForQueryClass) {
  EXPECT_EQ(F::ForQueryClass(DeltaSensitive{0.5}, 8).Describe(),
            "mcdiarmid(delta=0.5, n=8)");
  EXPECT_EQ(F::ForQueryClass(Subgaussian{2}, 8).Describe(),
            "subgaussian(sigma=2)");
  EXPECT_THROW(F::ForQueryClass(EmpiricalOnly{}, 8), ArgumentError);
}

TEST(AlphaForTest, WorkedValue) {
  // sigma = 0.5, ln(1/nu) = 8: alpha = 0.5 sqrt(16) = 2.
  EXPECT_NEAR(F::Subgaussian(0.5).AlphaForLevel(8.0), 2.0, 1e-15);
}

// The returned alpha reaches the level, and the double just below does not.
void ExpectMinimal(const F& f, double level) {
  const double alpha = f.AlphaForLevel(level);
  EXPECT_GE(f.Gamma(alpha), level);
  const double below = std::nextafter(alpha, 0.0);
  EXPECT_LT(f.Gamma(below), level * (1 + 1e-15)) << f.Describe();
}

TEST(AlphaForTest, MinimalOverGrid) {
  const std::vector<F> forms = {
      F::McDiarmid(0.01, 100), F::McDiarmid(1.0, 7), F::Subgaussian(0.1),
      F::Subgaussian(3.0), F::Subexponential(2.0, 0.1),
      F::Subexponential(1.0, 1.0, SubexponentialVariant::kStandardBernstein)};
  for (const F& f : forms) {
    for (double level : {1e-3, 0.5, 1.0, 4.6, 13.8, 50.0}) {
      if (std::holds_alternative<F::SubexponentialForm>(f.form())) {
        const auto& s = std::get<F::SubexponentialForm>(f.form());
        if (s.variant == SubexponentialVariant::kAsStated &&
            level > s.sigma * s.sigma / (2 * s.b * s.b)) {
          EXPECT_THROW(f.AlphaForLevel(level), InfeasibleError);
          continue;
        }
      }
      ExpectMinimal(f, level);
    }
  }
}

TEST(AlphaForTest, BisectionAgreesWithClosedForm) {
  const std::vector<F> forms = {
      F::McDiarmid(0.05, 200), F::Subgaussian(0.3), F::Subexponential(2.0, 0.2),
      F::Subexponential(1.0, 0.5, SubexponentialVariant::kStandardBernstein)};
  for (const F& f : forms) {
    for (double level : {0.2, 2.0, 9.0}) {
      const double analytic = f.AlphaForLevel(level);
      const double bisected = f.AlphaForLevelByBisection(level);
      EXPECT_NEAR(bisected, analytic, 2e-10 * analytic) << f.Describe();
      EXPECT_GE(f.Gamma(bisected), level);
    }
  }
}

TEST(AlphaForTest, BernsteinLinearBranch) {
  // Past sigma^2/(2b^2) = 2 the Bernstein form is alpha/(2b).
  const F f = F::Subexponential(1.0, 0.5, SubexponentialVariant::kStandardBernstein);
  EXPECT_NEAR(f.AlphaForLevel(5.0), 5.0, 1e-14);
  EXPECT_THROW(F::Subexponential(1.0, 0.5).AlphaForLevel(5.0), InfeasibleError);
}

TEST(AlphaForTest, Monotone) {
  const F f = F::McDiarmid(0.1, 30);
  double prev = 0.0;
  for (double nu = 0.5; nu > 1e-12; nu /= 3) {
    const double a = f.AlphaFor(nu);
    EXPECT_GT(a, prev);
    prev = a;
  }
}

TEST(AlphaForTest, RejectsBadNu) {
  EXPECT_THROW(F::Subgaussian(1).AlphaFor(0.0), ArgumentError);
  EXPECT_THROW(F::Subgaussian(1).AlphaFor(1.0), ArgumentError);
  EXPECT_THROW(F::Subgaussian(1).AlphaForLevel(
                   std::numeric_limits<double>::infinity()),
               ArgumentError);
}

TEST(CustomFormTest, InterpolatesAndInverts) {
  const F f = F::Custom({{1.0, 2.0}, {3.0, 4.0}});
  EXPECT_DOUBLE_EQ(f.Gamma(0.5), 1.0);
  EXPECT_DOUBLE_EQ(f.Gamma(2.0), 3.0);
  EXPECT_DOUBLE_EQ(f.Gamma(10.0), 4.0);
  EXPECT_NEAR(f.AlphaForLevel(3.0), 2.0, 1e-9);
  EXPECT_THROW(f.AlphaForLevel(4.5), InfeasibleError);
  EXPECT_FALSE(f.closed_form());
}

TEST(CustomFormTest, RejectsNonMonotone) {
  EXPECT_THROW(F::Custom({}), ArgumentError);
  EXPECT_THROW(F::Custom({{1.0, 2.0}, {0.5, 3.0}}), ArgumentError);
  EXPECT_THROW(F::Custom({{1.0, 2.0}, {2.0, 1.0}}), ArgumentError);
}

TEST(CertifyTest, McDiarmidMeanPasses) {
  const DataDistribution d(IidBernoulli{0.5}, 50);
  const F f = F::McDiarmid(1.0 / 50, 50);
  const std::vector<double> alphas = {0.05, 0.1, 0.2};
  const auto report =
      CertifyConcentration(d, MeanQuery(DeltaSensitive{1.0 / 50}), f, alphas,
                           20000, 5, 4);
  EXPECT_TRUE(report.all_pass);
  EXPECT_DOUBLE_EQ(report.mean, 0.5);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const auto& row : report.rows) EXPECT_LE(row.frequency, row.bound);
}

TEST(CertifyTest, RejectsOverclaimedCertificate) {
  // The sum of 10 standard normals has sd sqrt(10); claiming sigma = 1 fails.
  const DataDistribution d(IidGaussian{0, 1}, 10);
  const std::vector<double> alphas = {2.0, 3.0};
  const auto report = CertifyConcentration(d, SumQuery(Subgaussian{1.0}),
                                           F::Subgaussian(1.0), alphas, 20000, 6);
  EXPECT_FALSE(report.all_pass);
}

TEST(CertifyTest, GaussianSumPassesUnderOwnCertificate) {
  const DataDistribution d(IidGaussian{0, 1}, 10);
  const double sigma = std::sqrt(10.0);
  const std::vector<double> alphas = {3.0, 6.0, 9.0};
  const auto report = CertifyConcentration(
      d, SumQuery(Subgaussian{sigma}), F::Subgaussian(sigma), alphas, 20000, 7, 2);
  EXPECT_TRUE(report.all_pass);
}

TEST(CertifyTest, ThreadCountDoesNotChangeCounts) {
  const DataDistribution d(IidGaussian{0, 1}, 4);
  const std::vector<double> alphas = {1.0};
  const auto a = CertifyConcentration(d, SumQuery(Subgaussian{2}),
                                      F::Subgaussian(2), alphas, 10000, 8, 1);
  const auto b = CertifyConcentration(d, SumQuery(Subgaussian{2}),
                                      F::Subgaussian(2), alphas, 10000, 8, 5);
  EXPECT_EQ(a.rows[0].exceedances, b.rows[0].exceedances);
}

TEST(CertifyTest, NeedsEnoughTrials) {
  const DataDistribution d(IidGaussian{0, 1}, 4);
  const std::vector<double> alphas = {1.0};
  EXPECT_THROW(CertifyConcentration(d, SumQuery(Subgaussian{2}),
                                    F::Subgaussian(2), alphas, 999, 1),
               ArgumentError);
}

}  // namespace
}  // namespace typstab
