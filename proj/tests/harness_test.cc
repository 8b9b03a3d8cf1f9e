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

#include "typstab/harness.h"

#include <gtest/gtest.h>

#include <cmath>
#include <type_traits>
#include <vector>

#include "testing/statistics.h"
#include "typstab/errors.h"
#include "typstab/stats.h"

namespace typstab {
namespace {

// What an analyst sees of a past round is the query and its answer, and
// nothing else; a third member would break the binding below.
TEST(HistoryEntryTest, CarriesOnlyQueryAndAnswer) {
  auto [query, w] = HistoryEntry{};
  static_assert(std::is_same_v<decltype(w), double>);
  static_assert(std::is_same_v<decltype(query), std::shared_ptr<const QuerySpec>>);
  EXPECT_EQ(query, nullptr);
  EXPECT_EQ(w, 0.0);
}

TEST(RunSessionTest, SingleQueryMatchesExactBinomial) {
  const size_t n = 20;
  const DataDistribution dist(IidBernoulli{0.5}, n);
  SessionConfig config;
  config.k = 1;
  config.nu = 0.1;
  config.mechanism = MechanismKind::kNoiseless;
  config.f = ConcentrationFunction::McDiarmid(1.0 / n, n);
  auto query = std::make_shared<QuerySpec>(MeanQuery(DeltaSensitive{1.0 / n}));
  const int64_t sessions = 20000;
  const auto results = RunSessions(
      dist, [&](uint64_t) { return std::make_unique<FixedListAnalyst>(
                                std::vector<std::shared_ptr<const QuerySpec>>{query}); },
      config, sessions, 3, 4);
  int64_t violations = 0;
  for (const auto& r : results) violations += r.violations;
  const double alpha = results[0].alpha;
  EXPECT_NEAR(alpha, std::sqrt(std::log(10.0) / (2.0 * n)), 1e-14);
  const double exact =
      static_cast<double>(testing::BinomialDeviationTail(n, 0.5L, alpha));
  EXPECT_GT(exact, 0.01);
  EXPECT_LT(exact, 0.1);
  EXPECT_NEAR(static_cast<double>(violations) / sessions, exact,
              4.5 * BinomialSigma(exact, sessions));
}

TEST(RunSessionTest, NoiselessAnswersAreEmpirical) {
  const DataDistribution dist(IidBernoulli{0.3}, 10);
  SessionConfig config;
  config.k = 3;
  config.mechanism = MechanismKind::kNoiseless;
  RandomNonadaptiveAnalyst analyst(10, 0.5, 0.5, 1);
  const auto r = RunSession(dist, analyst, config, 2);
  ASSERT_EQ(r.records.size(), 3u);
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.w, rec.empirical);
    EXPECT_EQ(rec.true_error, rec.generalization_error);
  }
  EXPECT_EQ(r.records[1].query_id, "sign_2");
}

TEST(RunSessionTest, ReproducibleAndThreadInvariant) {
  const DataDistribution dist(IidBernoulli{0.5}, 30);
  SessionConfig config;
  config.k = 5;
  config.eta = 0.2;
  config.nu = 0.01;
  config.f = ConcentrationFunction::Subgaussian(1.0 / std::sqrt(15.0));
  auto factory = [](uint64_t s) {
    return std::make_unique<SignOverfitter>(30, 5, 0.5, 0.5, s);
  };
  const auto a = RunSessions(dist, factory, config, 50, 11, 1);
  const auto b = RunSessions(dist, factory, config, 50, 11, 5);
  for (size_t s = 0; s < a.size(); ++s) {
    for (size_t j = 0; j < 5; ++j) {
      EXPECT_EQ(a[s].records[j].w, b[s].records[j].w);
      EXPECT_EQ(a[s].records[j].mu, b[s].records[j].mu);
    }
  }
}

TEST(RunSessionTest, ClassMismatchFlagged) {
  const DataDistribution dist(IidGaussian{0, 1}, 10);
  SessionConfig config;
  config.k = 2;
  config.f = ConcentrationFunction::Subgaussian(1.0);
  auto tight = std::make_shared<QuerySpec>(MeanQuery(Subgaussian{0.5}));
  auto loose = std::make_shared<QuerySpec>(SumQuery(Subgaussian{std::sqrt(10.0)}));
  FixedListAnalyst analyst({tight, loose});
  const auto r = RunSession(dist, analyst, config, 1);
  EXPECT_FALSE(r.records[0].class_mismatch);
  EXPECT_TRUE(r.records[1].class_mismatch);
  EXPECT_TRUE(r.flagged);
}

TEST(RunSessionTest, SpotCheckCatchesOverclaimedQuery) {
  // Declares sigma = 0.1 for a sum with sd sqrt(10).
  const DataDistribution dist(IidGaussian{0, 1}, 10);
  SessionConfig config;
  config.k = 1;
  config.nu = 0.05;
  config.f = ConcentrationFunction::Subgaussian(0.1);
  config.spot_check_trials = 10000;
  auto liar = std::make_shared<QuerySpec>(SumQuery(Subgaussian{0.1}));
  FixedListAnalyst analyst({liar});
  const auto r = RunSession(dist, analyst, config, 4);
  EXPECT_FALSE(r.records[0].class_mismatch);
  EXPECT_TRUE(r.records[0].spot_check_failed);
  EXPECT_TRUE(r.flagged);
}

TEST(RunSessionTest, RejectsBadConfig) {
  const DataDistribution dist(IidBernoulli{0.5}, 4);
  FixedListAnalyst analyst({std::make_shared<QuerySpec>(MeanQuery(Subgaussian{1}))});
  SessionConfig config;
  config.k = 0;
  EXPECT_THROW(RunSession(dist, analyst, config, 1), ArgumentError);
  CallbackAnalyst none([](std::span<const HistoryEntry>) {
    return std::shared_ptr<const QuerySpec>();
  });
  config.k = 1;
  EXPECT_THROW(RunSession(dist, none, config, 1), ArgumentError);
}

TEST(SignOverfitterTest, FinalQueryShape) {
  SignOverfitter analyst(7, 3, 0.5, 0.5, 5);
  EXPECT_EQ(analyst.kept_coordinates(), 4u);
  std::vector<HistoryEntry> history;
  for (int j = 0; j < 2; ++j) {
    auto q = analyst.NextQuery(history);
    history.push_back(HistoryEntry{q, 0.3});
  }
  const auto final_query = analyst.NextQuery(history);
  EXPECT_EQ(final_query->id(), "final");
  const auto& cls = std::get<Subgaussian>(final_query->class_params());
  EXPECT_DOUBLE_EQ(cls.sigma, 0.5);
  // On the all-ones dataset each kept coordinate contributes +-1/4.
  const double v = (*final_query)(Dataset(std::vector<double>(7, 1.0)));
  EXPECT_NEAR(std::fabs(v * 4.0 - std::round(v * 4.0)), 0.0, 1e-12);
  EXPECT_LE(std::fabs(v), 1.0 + 1e-12);
}

TEST(SignOverfitterTest, RequiresTwoRounds) {
  EXPECT_THROW(SignOverfitter(10, 1, 0.5, 0.5, 1), ArgumentError);
}

TEST(GeneralizationTest, NoiselessOverfitsAndNoiseHelps) {
  const size_t n = 100, k = 40;
  const DataDistribution dist(IidBernoulli{0.5}, n);
  const auto f = ConcentrationFunction::Subgaussian(1.0 / std::sqrt(50.0));
  const auto params = ComputeAdaptiveAccuracyParameters(40, 47.0, 0.05, f);
  SessionConfig config;
  config.k = k;
  config.eta = params.eta;
  config.nu = params.nu;
  config.f = f;
  auto factory = [&](uint64_t s) {
    return std::make_unique<SignOverfitter>(n, k, 0.5, 0.5, s);
  };
  config.mechanism = MechanismKind::kNoiseless;
  const auto noiseless = RunSessions(dist, factory, config, 200, 1, 4);
  config.mechanism = MechanismKind::kLaplace;
  const auto laplace = RunSessions(dist, factory, config, 200, 1, 4);
  int overfit = 0;
  for (const auto& r : noiseless) overfit += r.records.back().generalization_error >= 0.15;
  EXPECT_GE(overfit, 180);
  const StabilityParams sp(params.eta, 0.0, params.nu);
  const auto a = EvaluateAgainstBounds(noiseless, noiseless[0].alpha, 1.0, sp);
  const auto b = EvaluateAgainstBounds(laplace, laplace[0].alpha, 1.0, sp);
  EXPECT_LT(b.mean_worst_generalization_error, a.mean_worst_generalization_error);
  EXPECT_TRUE(b.stability_pass);
}

TEST(AdaptiveParametersTest, Values) {
  const auto f = ConcentrationFunction::Subgaussian(1.0 / std::sqrt(50.0));
  const auto p = ComputeAdaptiveAccuracyParameters(40, 47.0, 0.05, f);
  const long double L = std::log(800.0L);
  EXPECT_NEAR(p.eta, static_cast<double>(1 / std::sqrt(40 * L)), 1e-15);
  const long double a = 47.0L / (std::sqrt(40.0L) * std::pow(L, 1.5L));
  EXPECT_NEAR(p.per_query_alpha, static_cast<double>(a), 1e-14);
  EXPECT_NEAR(p.nu, static_cast<double>(std::exp(-a * a * 25)), 1e-15);
  EXPECT_NEAR(p.eta, 0.061155, 1e-6);
  EXPECT_NEAR(p.nu, 0.0098313, 1e-7);
  EXPECT_THROW(ComputeAdaptiveAccuracyParameters(0, 1, 0.1, f), ArgumentError);
  EXPECT_THROW(ComputeAdaptiveAccuracyParameters(4, 1, 1.0, f), ArgumentError);
}

TEST(BoundsTest, StabilityBoundFormula) {
  const std::vector<SessionResult> none;
  const auto r = EvaluateAgainstBounds(none, 1.0, 1.0, StabilityParams(0.1, 0.0, 1e-3));
  EXPECT_NEAR(r.stability_bound, (std::exp(0.1) + 5.0) * 1e-3, 1e-18);
  EXPECT_NEAR(r.stability_bound, 6.105e-3, 1e-6);
}

TEST(BoundsTest, CountsViolationsAndExceedances) {
  SessionResult s1, s2;
  s1.records = {QueryRecord{"a", 0, 0, 0, 0, 0.5, 0.1, false, false},
                QueryRecord{"b", 0, 0, 0, 0, 0.05, 0.3, false, false}};
  s1.worst_true_error = 0.3;
  s1.worst_generalization_error = 0.5;
  s2.records = {QueryRecord{"a", 0, 0, 0, 0, 0.01, 0.01, false, false}};
  s2.worst_true_error = 0.01;
  s2.worst_generalization_error = 0.01;
  const std::vector<SessionResult> results = {s1, s2};
  const auto r = EvaluateAgainstBounds(results, 0.1, 0.2, StabilityParams(0.1, 0, 0.01));
  EXPECT_EQ(r.queries, 3);
  EXPECT_EQ(r.violations, 1);
  EXPECT_EQ(r.worst_true_exceedances, 1);
  EXPECT_DOUBLE_EQ(r.worst_true_rate, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_worst_generalization_error, 0.255);
}

}  // namespace
}  // namespace typstab
