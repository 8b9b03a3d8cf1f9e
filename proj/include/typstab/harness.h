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

// The adaptive analyst loop: one dataset X ~ P, k rounds in which the
// analyst picks a query from the earlier (query, answer) pairs and a
// mechanism answers it on X. Sessions record generalization error
// |q_j(X) - mu_j| and true error |mu_j - w_j| per round.

#ifndef TYPSTAB_HARNESS_H_
#define TYPSTAB_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "typstab/concentration.h"
#include "typstab/core_model.h"

namespace typstab {

// Everything an analyst may see about a past round.
struct HistoryEntry {
  std::shared_ptr<const QuerySpec> query;
  double w = 0.0;
};

class Analyst {
 public:
  virtual ~Analyst() = default;
  virtual std::string kind() const = 0;
  virtual std::shared_ptr<const QuerySpec> NextQuery(
      std::span<const HistoryEntry> history) = 0;
};

// Asks its list in order, cycling.
class FixedListAnalyst : public Analyst {
 public:
  explicit FixedListAnalyst(std::vector<std::shared_ptr<const QuerySpec>> queries);
  std::string kind() const override { return "fixed_list"; }
  std::shared_ptr<const QuerySpec> NextQuery(
      std::span<const HistoryEntry> history) override;

 private:
  std::vector<std::shared_ptr<const QuerySpec>> queries_;
};

// Round j asks the signed average (1/n) sum_i r_{j,i} (x_i - center) / scale
// for a uniformly random sign vector r_j drawn from DeriveSeed(seed, j). The
// answers are ignored. Declared sigma-subgaussian with sigma = 1/sqrt(n),
// valid when each (x_i - center) / scale is centered within a width-2 range.
class RandomNonadaptiveAnalyst : public Analyst {
 public:
  RandomNonadaptiveAnalyst(size_t n, double center, double scale, uint64_t seed);
  std::string kind() const override { return "random_nonadaptive"; }
  std::shared_ptr<const QuerySpec> NextQuery(
      std::span<const HistoryEntry> history) override;

 private:
  size_t n_;
  double center_;
  double scale_;
  uint64_t seed_;
};

// Rounds 1..k-1 are the random signed averages above. The last round scores
// coordinate i by s_i = sum_j w_j r_{j,i}, keeps the m = ceil(n/2) largest
// |s_i| (ties to the lower index) and asks (1/m) sum_{kept} sign(s_i) z_i,
// declared subgaussian with sigma = 1/sqrt(m). On noiseless answers that
// query is biased upward on X.
class SignOverfitter : public Analyst {
 public:
  SignOverfitter(size_t n, size_t k, double center, double scale, uint64_t seed);
  std::string kind() const override { return "sign_overfitter"; }
  std::shared_ptr<const QuerySpec> NextQuery(
      std::span<const HistoryEntry> history) override;

  size_t kept_coordinates() const { return (n_ + 1) / 2; }

 private:
  std::vector<double> Signs(size_t round) const;

  size_t n_;
  size_t k_;
  double center_;
  double scale_;
  uint64_t seed_;
};

class CallbackAnalyst : public Analyst {
 public:
  using Callback = std::function<std::shared_ptr<const QuerySpec>(
      std::span<const HistoryEntry>)>;
  explicit CallbackAnalyst(Callback callback) : callback_(std::move(callback)) {}
  std::string kind() const override { return "custom_callback"; }
  std::shared_ptr<const QuerySpec> NextQuery(
      std::span<const HistoryEntry> history) override {
    return callback_(history);
  }

 private:
  Callback callback_;
};

enum class MechanismKind { kLaplace, kGaussian, kNoiseless };

const char* MechanismKindName(MechanismKind kind);

struct SessionConfig {
  size_t k = 1;
  double eta = 0.1;
  // Gaussian only.
  double tau = 0.0;
  double nu = 0.01;
  MechanismKind mechanism = MechanismKind::kLaplace;
  // Concentration certificate the noise is calibrated to. Every query's own
  // certificate must reach gamma_n(alpha) at the calibrated alpha.
  ConcentrationFunction f = ConcentrationFunction::Subgaussian(1.0);
  // When positive, each query is spot-checked with CertifyConcentration at
  // the calibrated alpha using this many trials.
  int64_t spot_check_trials = 0;
};

struct QueryRecord {
  std::string query_id;
  double w = 0.0;
  double empirical = 0.0;  // q_j(X)
  double mu = 0.0;
  double mu_standard_error = 0.0;
  double generalization_error = 0.0;
  double true_error = 0.0;
  // The query's declared class is weaker than f at the calibrated alpha.
  bool class_mismatch = false;
  bool spot_check_failed = false;
};

struct SessionResult {
  std::vector<QueryRecord> records;
  // Calibrated half-width f.AlphaFor(nu), also the violation level. The
  // noiseless ablation computes it but adds no noise.
  double alpha = 0.0;
  double worst_true_error = 0.0;
  double worst_generalization_error = 0.0;
  // Rounds with generalization error above alpha.
  int violations = 0;
  bool flagged = false;
};

// Throws ArgumentError for k = 0, invalid parameters, or an analyst that
// returns no query.
SessionResult RunSession(const DataDistribution& dist, Analyst& analyst,
                         const SessionConfig& config, uint64_t seed);

using AnalystFactory = std::function<std::unique_ptr<Analyst>(uint64_t seed)>;

// Session s runs with seed DeriveSeed(seed, s). Its analyst is built from a
// seed derived from that one on a stream RunSession does not use.
std::vector<SessionResult> RunSessions(const DataDistribution& dist,
                                       const AnalystFactory& factory,
                                       const SessionConfig& config,
                                       int64_t sessions, uint64_t seed,
                                       int threads = 1);

struct AdaptiveAccuracyParameters {
  int k = 0;
  double alpha = 0.0;
  double beta = 0.0;
  // 1 / sqrt(k ln(k/beta)).
  double eta = 0.0;
  // alpha / (sqrt(k) ln^{3/2}(k/beta)).
  double per_query_alpha = 0.0;
  // exp(-gamma_n(per_query_alpha)).
  double nu = 0.0;
  // k^{3/4} ln^{1/4}(k/beta) nu + beta, the shape of the worst-true-error
  // failure probability with unit constants.
  double failure_shape = 0.0;
};

// Settings for k adaptive queries with target accuracy alpha and failure
// probability beta, with every hidden constant set to 1. Throws
// ArgumentError unless k >= 1, alpha > 0 and beta in (0, 1).
AdaptiveAccuracyParameters ComputeAdaptiveAccuracyParameters(
    int k, double alpha, double beta, const ConcentrationFunction& f);

struct BoundsReport {
  int64_t sessions = 0;
  int64_t queries = 0;
  // Per-query generalization violations |q_j(X) - mu_j| > alpha.
  int64_t violations = 0;
  double violation_rate = 0.0;
  // (e^eta + 5) nu + tau.
  double stability_bound = 0.0;
  double stability_sigma = 0.0;
  bool stability_pass = false;
  // Sessions with worst true error >= true_error_level.
  int64_t worst_true_exceedances = 0;
  double worst_true_rate = 0.0;
  double worst_true_ci_upper = 0.0;
  double mean_worst_true_error = 0.0;
  double mean_worst_generalization_error = 0.0;
  double worst_generalization_standard_error = 0.0;
};

// Aggregates sessions. `alpha` is the per-query violation level and
// `true_error_level` the worst-true-error level.
BoundsReport EvaluateAgainstBounds(std::span<const SessionResult> results,
                                   double alpha, double true_error_level,
                                   const StabilityParams& params);

}  // namespace typstab

#endif  // TYPSTAB_HARNESS_H_
