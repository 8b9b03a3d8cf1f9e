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

#include <algorithm>
#include <cmath>
#include <limits>

#include "typstab/errors.h"
#include "typstab/random.h"
#include "typstab/stats.h"

namespace typstab {
namespace {

constexpr char kModule[] = "concentration";
constexpr double kBisectionRelativeTolerance = 1e-10;
constexpr double kBracketCeiling = 1e300;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void RequirePositive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ArgumentError(kModule, std::string(name) + " must be a positive finite number");
  }
}

double CustomGamma(const ConcentrationFunction::CustomForm& form, double alpha) {
  const auto& table = form.table;
  double prev_alpha = 0.0;
  double prev_gamma = 0.0;
  for (const auto& [knot_alpha, knot_gamma] : table) {
    if (alpha <= knot_alpha) {
      const double t = (alpha - prev_alpha) / (knot_alpha - prev_alpha);
      return std::max(0.0, prev_gamma + t * (knot_gamma - prev_gamma));
    }
    prev_alpha = knot_alpha;
    prev_gamma = knot_gamma;
  }
  return std::max(0.0, prev_gamma);
}

}  // namespace

ConcentrationFunction ConcentrationFunction::McDiarmid(double delta, size_t n) {
  RequirePositive(delta, "sensitivity Delta");
  if (n == 0) throw ArgumentError(kModule, "n must be positive");
  return ConcentrationFunction(McDiarmidForm{delta, n});
}

ConcentrationFunction ConcentrationFunction::Subgaussian(double sigma) {
  RequirePositive(sigma, "sigma");
  return ConcentrationFunction(SubgaussianForm{sigma});
}

ConcentrationFunction ConcentrationFunction::Subexponential(
    double sigma, double b, SubexponentialVariant variant) {
  RequirePositive(sigma, "sigma");
  RequirePositive(b, "b");
  return ConcentrationFunction(SubexponentialForm{sigma, b, variant});
}

ConcentrationFunction ConcentrationFunction::Custom(
    std::vector<std::pair<double, double>> table) {
  if (table.empty()) throw ArgumentError(kModule, "custom table is empty");
  double prev_alpha = 0.0;
  double prev_gamma = 0.0;
  for (const auto& [alpha, gamma] : table) {
    if (!(alpha > prev_alpha) || !std::isfinite(alpha)) {
      throw ArgumentError(kModule,
                          "custom table alphas must be positive and strictly "
                          "increasing");
    }
    if (!(gamma >= prev_gamma) || !std::isfinite(gamma)) {
      throw ArgumentError(kModule,
                          "custom table gammas must be non-negative and "
                          "non-decreasing");
    }
    prev_alpha = alpha;
    prev_gamma = gamma;
  }
  return ConcentrationFunction(CustomForm{std::move(table)});
}

ConcentrationFunction ConcentrationFunction::ForQueryClass(const QueryClass& cls,
                                                           size_t n) {
  return std::visit(
      Overloaded{
          [n](const DeltaSensitive& c) { return McDiarmid(c.delta, n); },
          [](const typstab::Subgaussian& c) { return Subgaussian(c.sigma); },
          [](const typstab::Subexponential& c) {
            return Subexponential(c.sigma, c.b);
          },
          [](const EmpiricalOnly&) -> ConcentrationFunction {
            throw ArgumentError(kModule,
                                "an empirical-only query carries no "
                                "concentration certificate");
          },
      },
      cls);
}

std::string ConcentrationFunction::Describe() const {
  return std::visit(
      Overloaded{
          [](const McDiarmidForm& f) {
            return "mcdiarmid(delta=" + FormatDouble(f.delta) +
                   ", n=" + std::to_string(f.n) + ")";
          },
          [](const SubgaussianForm& f) {
            return "subgaussian(sigma=" + FormatDouble(f.sigma) + ")";
          },
          [](const SubexponentialForm& f) {
            return "subexponential(sigma=" + FormatDouble(f.sigma) +
                   ", b=" + FormatDouble(f.b) + ", " +
                   (f.variant == SubexponentialVariant::kAsStated
                        ? "as_stated"
                        : "standard_bernstein") +
                   ")";
          },
          [](const CustomForm& f) {
            return "custom(" + std::to_string(f.table.size()) + " knots)";
          },
      },
      form_);
}

double ConcentrationFunction::Gamma(double alpha) const {
  if (!(alpha >= 0.0)) throw ArgumentError(kModule, "alpha must be >= 0");
  if (alpha == 0.0 && closed_form()) return 0.0;
  return std::visit(
      Overloaded{
          [alpha](const McDiarmidForm& f) {
            return 2.0 * alpha * alpha /
                   (static_cast<double>(f.n) * f.delta * f.delta);
          },
          [alpha](const SubgaussianForm& f) {
            return alpha * alpha / (2.0 * f.sigma * f.sigma);
          },
          [alpha](const SubexponentialForm& f) {
            const double quadratic = alpha * alpha / (2.0 * f.sigma * f.sigma);
            const double second =
                f.variant == SubexponentialVariant::kAsStated
                    ? f.sigma * f.sigma / (2.0 * f.b * f.b)
                    : alpha / (2.0 * f.b);
            return std::min(quadratic, second);
          },
          [alpha](const CustomForm& f) { return CustomGamma(f, alpha); },
      },
      form_);
}

double ConcentrationFunction::AlphaFor(double nu) const {
  if (!(nu > 0.0 && nu < 1.0)) {
    throw ArgumentError(kModule, "nu must lie in (0, 1)");
  }
  return AlphaForLevel(-std::log(nu));
}

double ConcentrationFunction::AlphaForLevel(double level) const {
  if (!(level > 0.0) || !std::isfinite(level)) {
    throw ArgumentError(kModule, "ln(1/nu) must be a positive finite number");
  }
  auto infeasible = [&] {
    return InfeasibleError(kModule, Describe() + " never reaches ln(1/nu) = " +
                                        FormatDouble(level));
  };
  double alpha = std::visit(
      Overloaded{
          [&](const McDiarmidForm& f) {
            return f.delta * std::sqrt(static_cast<double>(f.n) * level / 2.0);
          },
          [&](const SubgaussianForm& f) {
            return f.sigma * std::sqrt(2.0 * level);
          },
          [&](const SubexponentialForm& f) {
            const double cap = f.sigma * f.sigma / (2.0 * f.b * f.b);
            if (level <= cap) return f.sigma * std::sqrt(2.0 * level);
            if (f.variant == SubexponentialVariant::kAsStated) throw infeasible();
            return 2.0 * f.b * level;
          },
          [&](const CustomForm& f) {
            if (f.table.back().second < level) throw infeasible();
            return AlphaForLevelByBisection(level);
          },
      },
      form_);
  // Rounding in the closed forms can leave gamma one ulp short of the level;
  // step up to the first representable alpha that reaches it.
  while (Gamma(alpha) < level) {
    alpha = std::nextafter(alpha, std::numeric_limits<double>::infinity());
  }
  return alpha;
}

double ConcentrationFunction::AlphaForLevelByBisection(double level) const {
  if (!(level > 0.0) || !std::isfinite(level)) {
    throw ArgumentError(kModule, "ln(1/nu) must be a positive finite number");
  }
  double hi = 1.0;
  while (Gamma(hi) < level) {
    hi *= 2.0;
    if (hi > kBracketCeiling) {
      throw InfeasibleError(kModule, Describe() + " never reaches ln(1/nu) = " +
                                         FormatDouble(level));
    }
  }
  double lo = hi > 1.0 ? hi / 2.0 : 0.0;
  for (int iteration = 0;
       iteration < 400 && hi - lo > kBisectionRelativeTolerance * hi;
       ++iteration) {
    const double mid = 0.5 * (lo + hi);
    if (Gamma(mid) >= level) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

CertificationReport CertifyConcentration(const DataDistribution& dist,
                                         const QuerySpec& q,
                                         const ConcentrationFunction& f,
                                         std::span<const double> alphas,
                                         int64_t trials, uint64_t seed,
                                         int threads) {
  if (trials < kMinMonteCarloTrials) {
    throw ArgumentError(kModule, "certification needs at least " +
                                     std::to_string(kMinMonteCarloTrials) +
                                     " trials");
  }
  const ExpectedValue mu =
      ComputeExpectedValue(dist, q, DeriveSeed(seed, 0), threads);
  const uint64_t trial_seed = DeriveSeed(seed, 1);
  std::vector<double> deviations(static_cast<size_t>(trials));
  ParallelFor(deviations.size(), threads, [&](size_t t) {
    deviations[t] = std::fabs(q(dist.Sample(DeriveSeed(trial_seed, t))) - mu.value);
  });

  CertificationReport report;
  report.mean = mu.value;
  report.mean_standard_error = mu.standard_error;
  report.all_pass = true;
  for (double alpha : alphas) {
    CertificationRow row;
    row.alpha = alpha;
    row.trials = trials;
    row.exceedances = std::count_if(deviations.begin(), deviations.end(),
                                    [alpha](double d) { return d > alpha; });
    row.frequency = static_cast<double>(row.exceedances) / static_cast<double>(trials);
    row.ci_upper = row.frequency + 3.0 * BinomialSigma(row.frequency, trials);
    row.bound = std::exp(-f.Gamma(alpha));
    row.pass = row.ci_upper <= row.bound ||
               row.frequency <= row.bound + 3.0 * BinomialSigma(row.bound, trials);
    report.all_pass = report.all_pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace typstab
