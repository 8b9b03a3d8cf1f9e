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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "typstab/errors.h"
#include "typstab/mechanisms.h"
#include "typstab/random.h"
#include "typstab/stats.h"

namespace typstab {
namespace {

constexpr char kModule[] = "harness";
// Stream tags keep dataset, noise and mean-estimation draws apart.
constexpr uint64_t kDatasetStream = 0;
constexpr uint64_t kNoiseStream = 1;
constexpr uint64_t kMeanStream = 2;
constexpr uint64_t kSpotCheckStream = 3;
constexpr uint64_t kAnalystStream = 4;

std::vector<double> RandomSigns(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> r(n);
  for (double& v : r) v = (rng.NextU64() >> 63) ? 1.0 : -1.0;
  return r;
}

std::shared_ptr<const QuerySpec> SignedAverage(const std::string& id,
                                               std::vector<double> signs,
                                               size_t denominator, double center,
                                               double scale) {
  const double inv = 1.0 / static_cast<double>(denominator);
  for (double& v : signs) v *= inv;
  return std::make_shared<QuerySpec>(
      LinearQuery(id, std::move(signs), center, scale,
                  Subgaussian{1.0 / std::sqrt(static_cast<double>(denominator))}));
}

bool WeakerThan(const QuerySpec& q, const ConcentrationFunction& f, size_t n,
                double alpha) {
  if (std::holds_alternative<EmpiricalOnly>(q.class_params())) return true;
  const ConcentrationFunction own =
      ConcentrationFunction::ForQueryClass(q.class_params(), n);
  return own.Gamma(alpha) < f.Gamma(alpha) * (1.0 - 1e-12);
}

}  // namespace

FixedListAnalyst::FixedListAnalyst(
    std::vector<std::shared_ptr<const QuerySpec>> queries)
    : queries_(std::move(queries)) {
  if (queries_.empty()) throw ArgumentError(kModule, "fixed list is empty");
}

std::shared_ptr<const QuerySpec> FixedListAnalyst::NextQuery(
    std::span<const HistoryEntry> history) {
  return queries_[history.size() % queries_.size()];
}

RandomNonadaptiveAnalyst::RandomNonadaptiveAnalyst(size_t n, double center,
                                                   double scale, uint64_t seed)
    : n_(n), center_(center), scale_(scale), seed_(seed) {
  if (n == 0) throw ArgumentError(kModule, "n must be positive");
  if (!(scale > 0.0)) throw ArgumentError(kModule, "scale must be positive");
}

std::shared_ptr<const QuerySpec> RandomNonadaptiveAnalyst::NextQuery(
    std::span<const HistoryEntry> history) {
  const size_t j = history.size();
  return SignedAverage("sign_" + std::to_string(j + 1),
                       RandomSigns(n_, DeriveSeed(seed_, j)), n_, center_, scale_);
}

SignOverfitter::SignOverfitter(size_t n, size_t k, double center, double scale,
                               uint64_t seed)
    : n_(n), k_(k), center_(center), scale_(scale), seed_(seed) {
  if (n == 0) throw ArgumentError(kModule, "n must be positive");
  if (k < 2) throw ArgumentError(kModule, "the sign overfitter needs k >= 2");
  if (!(scale > 0.0)) throw ArgumentError(kModule, "scale must be positive");
}

std::vector<double> SignOverfitter::Signs(size_t round) const {
  return RandomSigns(n_, DeriveSeed(seed_, round));
}

std::shared_ptr<const QuerySpec> SignOverfitter::NextQuery(
    std::span<const HistoryEntry> history) {
  const size_t j = history.size();
  if (j + 1 < k_) {
    return SignedAverage("sign_" + std::to_string(j + 1), Signs(j), n_, center_,
                         scale_);
  }
  std::vector<double> score(n_, 0.0);
  for (size_t t = 0; t < std::min(history.size(), k_ - 1); ++t) {
    const std::vector<double> r = Signs(t);
    for (size_t i = 0; i < n_; ++i) score[i] += history[t].w * r[i];
  }
  std::vector<size_t> order(n_);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::fabs(score[a]) > std::fabs(score[b]);
  });
  const size_t m = kept_coordinates();
  std::vector<double> signs(n_, 0.0);
  for (size_t r = 0; r < m; ++r) {
    const size_t i = order[r];
    signs[i] = score[i] < 0.0 ? -1.0 : 1.0;
  }
  return SignedAverage("final", std::move(signs), m, center_, scale_);
}

const char* MechanismKindName(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kLaplace:
      return "laplace";
    case MechanismKind::kGaussian:
      return "gaussian";
    case MechanismKind::kNoiseless:
      return "noiseless";
  }
  return "unknown";
}

SessionResult RunSession(const DataDistribution& dist, Analyst& analyst,
                         const SessionConfig& config, uint64_t seed) {
  if (config.k == 0) throw ArgumentError(kModule, "k must be >= 1");
  if (!(config.eta > 0.0)) throw ArgumentError(kModule, "eta must be > 0");
  const double alpha = config.f.AlphaFor(config.nu);
  std::optional<CalibratedNoiseMechanism> mech;
  if (config.mechanism == MechanismKind::kLaplace) {
    mech = CalibratedNoiseMechanism::Laplace(alpha, config.eta);
  } else if (config.mechanism == MechanismKind::kGaussian) {
    mech = CalibratedNoiseMechanism::Gaussian(alpha, config.eta, config.tau);
  }

  const Dataset x = dist.Sample(DeriveSeed(seed, kDatasetStream));
  const uint64_t noise_seed = DeriveSeed(seed, kNoiseStream);
  const uint64_t mean_seed = DeriveSeed(seed, kMeanStream);
  const uint64_t spot_seed = DeriveSeed(seed, kSpotCheckStream);

  SessionResult result;
  result.alpha = alpha;
  std::vector<HistoryEntry> history;
  history.reserve(config.k);
  for (size_t j = 0; j < config.k; ++j) {
    std::shared_ptr<const QuerySpec> q = analyst.NextQuery(history);
    if (!q) throw ArgumentError(kModule, "analyst returned no query");

    QueryRecord rec;
    rec.query_id = q->id();
    rec.empirical = (*q)(x);
    rec.w = mech ? ApplyMechanism(*mech, *q, x, DeriveSeed(noise_seed, j)).w
                 : rec.empirical;
    const ExpectedValue mu =
        ComputeExpectedValue(dist, *q, DeriveSeed(mean_seed, j));
    rec.mu = mu.value;
    rec.mu_standard_error = mu.standard_error;
    rec.generalization_error = std::fabs(rec.empirical - rec.mu);
    rec.true_error = std::fabs(rec.mu - rec.w);
    rec.class_mismatch = WeakerThan(*q, config.f, dist.n(), alpha);
    if (config.spot_check_trials > 0) {
      const double level[] = {alpha};
      rec.spot_check_failed =
          !CertifyConcentration(dist, *q, config.f, level,
                                config.spot_check_trials,
                                DeriveSeed(spot_seed, j))
               .all_pass;
    }
    result.flagged = result.flagged || rec.class_mismatch || rec.spot_check_failed;
    result.worst_true_error = std::max(result.worst_true_error, rec.true_error);
    result.worst_generalization_error =
        std::max(result.worst_generalization_error, rec.generalization_error);
    if (rec.generalization_error > alpha) ++result.violations;

    history.push_back(HistoryEntry{std::move(q), rec.w});
    result.records.push_back(std::move(rec));
  }
  return result;
}

std::vector<SessionResult> RunSessions(const DataDistribution& dist,
                                       const AnalystFactory& factory,
                                       const SessionConfig& config,
                                       int64_t sessions, uint64_t seed,
                                       int threads) {
  if (sessions < 1) throw ArgumentError(kModule, "sessions must be >= 1");
  std::vector<SessionResult> results(static_cast<size_t>(sessions));
  ParallelFor(results.size(), threads, [&](size_t s) {
    const uint64_t session_seed = DeriveSeed(seed, s);
    std::unique_ptr<Analyst> analyst =
        factory(DeriveSeed(session_seed, kAnalystStream));
    results[s] = RunSession(dist, *analyst, config, session_seed);
  });
  return results;
}

AdaptiveAccuracyParameters ComputeAdaptiveAccuracyParameters(
    int k, double alpha, double beta, const ConcentrationFunction& f) {
  if (k < 1) throw ArgumentError(kModule, "k must be >= 1");
  if (!(alpha > 0.0)) throw ArgumentError(kModule, "alpha must be > 0");
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ArgumentError(kModule, "beta must lie in (0, 1)");
  }
  AdaptiveAccuracyParameters p;
  p.k = k;
  p.alpha = alpha;
  p.beta = beta;
  const double kd = static_cast<double>(k);
  const double log_term = std::log(kd / beta);
  p.eta = 1.0 / std::sqrt(kd * log_term);
  p.per_query_alpha = alpha / (std::sqrt(kd) * std::pow(log_term, 1.5));
  p.nu = std::exp(-f.Gamma(p.per_query_alpha));
  p.failure_shape =
      std::pow(kd, 0.75) * std::pow(log_term, 0.25) * p.nu + beta;
  return p;
}

BoundsReport EvaluateAgainstBounds(std::span<const SessionResult> results,
                                   double alpha, double true_error_level,
                                   const StabilityParams& params) {
  BoundsReport report;
  report.sessions = static_cast<int64_t>(results.size());
  RunningMoments worst_true;
  RunningMoments worst_gen;
  for (const SessionResult& r : results) {
    for (const QueryRecord& rec : r.records) {
      ++report.queries;
      if (rec.generalization_error > alpha) ++report.violations;
    }
    if (r.worst_true_error >= true_error_level) ++report.worst_true_exceedances;
    worst_true.Add(r.worst_true_error);
    worst_gen.Add(r.worst_generalization_error);
  }
  if (report.queries > 0) {
    report.violation_rate = static_cast<double>(report.violations) /
                            static_cast<double>(report.queries);
  }
  report.stability_bound =
      (std::exp(params.eta()) + 5.0) * params.nu() + params.tau();
  report.stability_sigma =
      BinomialSigma(std::min(report.stability_bound, 1.0), report.queries);
  report.stability_pass = report.violation_rate <=
                          report.stability_bound + 3.0 * report.stability_sigma;
  if (report.sessions > 0) {
    report.worst_true_rate = static_cast<double>(report.worst_true_exceedances) /
                             static_cast<double>(report.sessions);
    report.worst_true_ci_upper =
        report.worst_true_rate +
        3.0 * BinomialSigma(report.worst_true_rate, report.sessions);
  }
  report.mean_worst_true_error = worst_true.mean();
  report.mean_worst_generalization_error = worst_gen.mean();
  report.worst_generalization_standard_error = worst_gen.standard_error();
  return report;
}

}  // namespace typstab
