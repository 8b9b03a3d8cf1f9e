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

#include "typstab/composition.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>
#include <map>
#include <type_traits>
#include <vector>

#include "testing/composition_oracle.h"
#include "typstab/errors.h"
#include "typstab/random.h"
#include "typstab/stats.h"

namespace typstab {
namespace {

using testing::Big;
using testing::RelativeError;

constexpr double kOracleTolerance = 1e-9;

// Past the double range the calculator reports infinity.
void ExpectClose(double got, const Big& want, const std::string& what) {
  if (want > Big(std::numeric_limits<double>::max())) {
    EXPECT_TRUE(std::isinf(got)) << what;
    return;
  }
  EXPECT_LT(RelativeError(got, want), kOracleTolerance) << what;
}

void ExpectMatchesOracle(const CompositionSchedule& s,
                         const testing::OracleResult& want) {
  ASSERT_EQ(s.per_step.size(), want.steps.size());
  for (size_t j = 0; j < s.per_step.size(); ++j) {
    ExpectClose(s.per_step[j].eta, want.steps[j].eta, "eta_" + std::to_string(j + 1));
    ExpectClose(s.per_step[j].tau, want.steps[j].tau, "tau_" + std::to_string(j + 1));
    EXPECT_EQ(s.per_step[j].nu, s.per_step[j].tau);
  }
  ExpectClose(s.final_params.eta, want.eta_star, "eta*");
  ExpectClose(s.final_params.tau, want.tau_star, "tau*");
  EXPECT_EQ(s.final_params.nu, s.final_params.tau);
}

TEST(PureCompositionTest, MatchesOracleOnGrid) {
  int points = 0;
  for (double eta : {0.01, 0.1, 0.5, 1.0}) {
    for (double nu : {0.0, 1e-12, 1e-6, 1e-3}) {
      for (int k : {2, 4, 10, 40}) {
        for (double tp : {1e-6, 0.01, 0.3}) {
          ExpectMatchesOracle(PureAdaptiveCompose(eta, nu, k, tp),
                              testing::OraclePure(eta, nu, k, tp));
          ++points;
        }
      }
    }
  }
  EXPECT_GE(points, 100);
}

TEST(ApproxCompositionTest, MatchesOracleOnGrid) {
  int points = 0;
  for (double eta : {0.05, 0.2, 1.0, 1.5}) {
    for (double tau_frac : {1e-6, 0.01, 1.0}) {
      const double tau = eta / 50.0 * tau_frac;
      for (double nu : {1e-12, 1e-6, 1e-3}) {
        for (int k : {2, 5, 20}) {
          for (double tp : {1e-4, 0.05}) {
            const ApproxComposition got = ApproxAdaptiveCompose(eta, tau, nu, k, tp);
            const auto want = testing::OracleApprox(eta, tau, nu, k, tp);
            EXPECT_LT(RelativeError(got.constants.tau_hat, want.tau_hat),
                      kOracleTolerance);
            EXPECT_LT(RelativeError(got.constants.psi_tau, want.psi),
                      kOracleTolerance);
            ExpectMatchesOracle(got.schedule, want);
            ++points;
          }
        }
      }
    }
  }
  EXPECT_GE(points, 100);
}

TEST(PureCompositionTest, WorkedValue) {
  const auto s = PureAdaptiveCompose(0.1, 1e-6, 4, 0.01);
  EXPECT_NEAR(s.final_params.eta, 1.9471, 5e-5);
  EXPECT_TRUE(s.final_params.vacuous);
  EXPECT_FALSE(s.beyond_stated_range);
  EXPECT_EQ(s.regime, CompositionRegime::kPure);
}

TEST(ApproxConstantsTest, WorkedTauHat) {
  const auto c = ComputeApproxConstants(1.0, 0.01);
  EXPECT_DOUBLE_EQ(c.tau_hat, 0.02 / (1.0 - std::exp(-1.0)));
  // Four-digit rounding of 0.0316395.
  EXPECT_NEAR(c.tau_hat, 0.031642, 5e-6);
}

TEST(ApproxConstantsTest, ZeroTauGivesZero) {
  const auto c = ComputeApproxConstants(0.3, 0.0);
  EXPECT_EQ(c.tau_hat, 0.0);
  EXPECT_EQ(c.psi_tau, 0.0);
}

TEST(ApproxConstantsTest, SmallEtaMatchesOracle) {
  // expm1 keeps the denominators accurate for tiny eta.
  for (double eta : {1e-8, 1e-5, 1e-3}) {
    const auto c = ComputeApproxConstants(eta, eta / 100);
    EXPECT_LT(RelativeError(c.tau_hat, testing::OracleTauHat(Big(eta), Big(eta / 100))),
              1e-12);
    EXPECT_LT(RelativeError(c.psi_tau, testing::OraclePsi(Big(eta), Big(eta / 100))),
              1e-9);
  }
}

TEST(CompositionPropertyTest, EtaStarIncreasesWithKAndEta) {
  for (double tp : {1e-4, 0.01}) {
    double prev = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double e = PureAdaptiveCompose(0.1, 1e-9, k, tp).final_params.eta;
      EXPECT_GT(e, prev);
      prev = e;
    }
    prev = 0.0;
    for (double eta = 0.01; eta < 1.5; eta *= 1.3) {
      const double e =
          ApproxAdaptiveCompose(eta, eta / 100, 1e-9, 6, tp).schedule.final_params.eta;
      EXPECT_GT(e, prev);
      prev = e;
    }
  }
}

TEST(CompositionPropertyTest, TauPrimeTradeOffOnSmallNuGrid) {
  // eta* falls and tau* rises as tau' grows, while nu is small enough that
  // the e^{eta_t} nu terms do not dominate.
  for (double nu : {0.0, 1e-12, 1e-10}) {
    for (double eta : {0.05, 0.1, 0.2}) {
      for (int k : {2, 4, 8}) {
        double prev_eta = std::numeric_limits<double>::infinity();
        double prev_tau = 0.0;
        for (double tp = 1e-6; tp < 0.9; tp *= 2) {
          const auto f = PureAdaptiveCompose(eta, nu, k, tp).final_params;
          EXPECT_LT(f.eta, prev_eta);
          EXPECT_GT(f.tau, prev_tau);
          prev_eta = f.eta;
          prev_tau = f.tau;
        }
      }
    }
  }
}

TEST(CompositionPropertyTest, TauStarNotMonotoneForLargeNu) {
  // With nu = 1e-6 and eta = 1, shrinking tau' inflates e^{eta_1} nu faster
  // than it saves in j tau'/eta.
  const double small = PureAdaptiveCompose(1.0, 1e-6, 2, 1e-6).final_params.tau;
  const double larger = PureAdaptiveCompose(1.0, 1e-6, 2, 1e-5).final_params.tau;
  EXPECT_GT(small, larger);
}

TEST(CompositionPropertyTest, ScheduleIsIncreasing) {
  const auto s = ApproxAdaptiveCompose(0.5, 0.005, 1e-8, 12, 0.01).schedule;
  for (size_t j = 1; j < s.per_step.size(); ++j) {
    EXPECT_GT(s.per_step[j].eta, s.per_step[j - 1].eta);
    EXPECT_GT(s.per_step[j].tau, s.per_step[j - 1].tau);
  }
}

TEST(CompositionTest, SingleStepIsFlagged) {
  const auto s = PureAdaptiveCompose(0.1, 1e-6, 1, 0.01);
  EXPECT_TRUE(s.beyond_stated_range);
  ASSERT_EQ(s.per_step.size(), 1u);
  EXPECT_TRUE(ApproxAdaptiveCompose(0.1, 0.001, 1e-6, 1, 0.01)
                  .schedule.beyond_stated_range);
}

TEST(CompositionTest, PureRejectsBadArguments) {
  EXPECT_THROW(PureAdaptiveCompose(0.1, 0.0, 0, 0.01), ArgumentError);
  EXPECT_THROW(PureAdaptiveCompose(0.0, 0.0, 2, 0.01), ArgumentError);
  EXPECT_THROW(PureAdaptiveCompose(0.1, 1.0, 2, 0.01), ArgumentError);
  EXPECT_THROW(PureAdaptiveCompose(0.1, 0.0, 2, 1.0), ArgumentError);
}

std::string ApproxError(double eta, double tau, double nu) {
  try {
    ApproxAdaptiveCompose(eta, tau, nu, 3, 0.01);
  } catch (const ArgumentError& e) {
    return e.what();
  }
  return "";
}

TEST(CompositionTest, ApproxNamesViolatedBound) {
  EXPECT_NE(ApproxError(0.1, 0.01, 1e-6).find("tau <= eta/50"), std::string::npos);
  EXPECT_NE(ApproxError(2.0, 0.001, 1e-6).find("eta <= 3/2"), std::string::npos);
  EXPECT_NE(ApproxError(0.1, 0.0, 1e-6).find("tau > 0"), std::string::npos);
  EXPECT_NE(ApproxError(0.1, 0.001, 0.0).find("0 < nu < 1"), std::string::npos);
  EXPECT_EQ(ApproxError(0.1, 0.002, 1e-6), "");
}

TEST(NonAdaptiveTest, Linear) {
  const auto p = NonAdaptiveCompose(StabilityParams(0.1, 0.01, 0.02), 5);
  EXPECT_DOUBLE_EQ(p.eta(), 0.5);
  EXPECT_DOUBLE_EQ(p.tau(), 0.05);
  EXPECT_DOUBLE_EQ(p.nu(), 0.1);
  EXPECT_THROW(NonAdaptiveCompose(StabilityParams(0.1, 0, 0.2), 5), ArgumentError);
  EXPECT_THROW(NonAdaptiveCompose(StabilityParams(0.1, 0, 0.0), 0), ArgumentError);
}

// The adversary sees outputs only.
static_assert(std::is_same_v<decltype(&CompositionAdversary::Choose),
                             AdversaryChoice (CompositionAdversary::*)(
                                 std::span<const double>)>);

std::shared_ptr<const StableAlgorithm> Reference(bool mirrored, double eta) {
  const double bias = ReferenceBiasForEta(eta);
  DiscreteInstance inst = DiscreteReferenceMechanism(bias, eta);
  if (mirrored) inst = inst.PostProcess({{0.0, 1.0}, {1.0, 0.0}});
  return std::make_shared<DiscreteAlgorithm>(
      inst, StabilityParams(eta, 0.0, 0.0), mirrored ? "mirrored" : "forward");
}

TEST(RunCompositionTest, FixedSequenceCyclesAndLogs) {
  auto a = std::make_shared<ConstantAlgorithm>(1.0, StabilityParams(0.1, 0, 0));
  auto b = std::make_shared<ConstantAlgorithm>(2.0, StabilityParams(0.1, 0, 0));
  FixedSequenceAdversary adv({a, b});
  const auto t = RunComposition(Dataset({0.0}), adv, 5, StabilityParams(0.1, 0, 0), 1);
  EXPECT_EQ(t.outputs(), (std::vector<double>{1, 2, 1, 2, 1}));
  EXPECT_EQ(t.adversary_log[3], "fixed[1]");
  EXPECT_EQ(t.entries[4].step, 5);
}

TEST(RunCompositionTest, RejectsWeakerDeclaration) {
  auto a = std::make_shared<ConstantAlgorithm>(1.0, StabilityParams(0.2, 0, 0));
  FixedSequenceAdversary adv({a});
  EXPECT_THROW(RunComposition(Dataset({0.0}), adv, 2, StabilityParams(0.1, 0, 0), 1),
               ContractViolation);
}

TEST(RunCompositionTest, RejectsFalseDiscreteClaim) {
  // Declares eta = 0.1 but the table needs ln 1.5.
  auto liar = std::make_shared<DiscreteAlgorithm>(
      DiscreteReferenceMechanism(0.25, std::log(1.5)), StabilityParams(0.1, 0, 0),
      "liar");
  FixedSequenceAdversary adv({liar});
  EXPECT_THROW(RunComposition(Dataset({1.0}), adv, 1, StabilityParams(0.1, 0, 0), 1),
               ContractViolation);
}

TEST(RunCompositionTest, RejectsMissingChoice) {
  CallbackAdversary adv([](std::span<const double>) { return AdversaryChoice{}; });
  EXPECT_THROW(RunComposition(Dataset({0.0}), adv, 1, StabilityParams(0.1, 0, 0), 1),
               ContractViolation);
}

TEST(RunCompositionTest, NoiseAlgorithmDeterministic) {
  auto algo = std::make_shared<NoiseAlgorithm>(
      MeanQuery(Subgaussian{0.1}), CalibratedNoiseMechanism::Laplace(0.3, 0.1), 0.01);
  FixedSequenceAdversary adv({algo});
  const Dataset x({1.0, 0.0});
  const auto a = RunComposition(x, adv, 3, StabilityParams(0.1, 0, 0.01), 8);
  const auto b = RunComposition(x, adv, 3, StabilityParams(0.1, 0, 0.01), 8);
  EXPECT_EQ(a.outputs(), b.outputs());
  EXPECT_EQ(a.entries[0].descriptor, "laplace(mean)");
  EXPECT_EQ(a.entries[0].output.true_query_value, 0.5);
}

// Exact transcript distribution of the sign-following composition: step i
// uses the forward table if i = 0 or the last output was 1, else the mirror.
std::map<std::vector<int>, double> EnumerateTranscripts(int k, double eta,
                                                        size_t atom) {
  const double bias = ReferenceBiasForEta(eta);
  const double forward[2][2] = {{0.5, 0.5}, {1 - bias, bias}};
  std::map<std::vector<int>, double> out;
  for (int mask = 0; mask < (1 << k); ++mask) {
    std::vector<int> z(k);
    double p = 1.0;
    for (int i = 0; i < k; ++i) {
      z[i] = (mask >> i) & 1;
      const bool mirrored = i > 0 && z[i - 1] == 0;
      const int col = mirrored ? 1 - z[i] : z[i];
      p *= forward[atom][col];
    }
    out[z] = p;
  }
  return out;
}

TEST(RunCompositionTest, AdaptiveTranscriptsMatchEnumeration) {
  const double eta = 0.4;
  const auto fwd = Reference(false, eta);
  const auto mir = Reference(true, eta);
  for (int k : {3, 6}) {
    const auto exact = EnumerateTranscripts(k, eta, 1);
    std::map<std::vector<int>, int> counts;
    const int sessions = 10000;
    for (int s = 0; s < sessions; ++s) {
      CallbackAdversary adv([&](std::span<const double> prev) {
        const bool forward = prev.empty() || prev.back() == 1.0;
        return AdversaryChoice{forward ? fwd : mir, forward ? "f" : "m"};
      });
      const auto t = RunComposition(Dataset({1.0}), adv, k,
                                    StabilityParams(eta, 0, 0), DeriveSeed(77, s));
      std::vector<int> z;
      for (double w : t.outputs()) z.push_back(static_cast<int>(w));
      ++counts[z];
    }
    for (const auto& [z, p] : exact) {
      const double freq = static_cast<double>(counts[z]) / sessions;
      EXPECT_NEAR(freq, p, 4.5 * BinomialSigma(p, sessions) + 1e-12);
    }
  }
}

}  // namespace
}  // namespace typstab
