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

#include "typstab/core_model.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "typstab/errors.h"
#include "typstab/random.h"
#include "typstab/stats.h"

namespace typstab {
namespace {

constexpr char kModule[] = "core_model";
constexpr double kNormalizationTolerance = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void CheckProbabilityVector(std::span<const double> p, const char* what) {
  if (p.empty()) throw ConfigError(kModule, std::string(what) + " is empty");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(kModule,
                        std::string(what) + " has an entry outside [0, 1]");
    }
    total += v;
  }
  if (std::fabs(total - 1.0) > kNormalizationTolerance) {
    throw ConfigError(kModule, std::string(what) + " sums to " +
                                   FormatDouble(total) + ", not 1");
  }
}

// m^n, or nullopt when it exceeds `limit`.
std::optional<size_t> PowerWithin(size_t m, size_t n, size_t limit) {
  size_t result = 1;
  for (size_t i = 0; i < n; ++i) {
    if (m != 0 && result > limit / m) return std::nullopt;
    result *= m;
  }
  return result;
}

std::vector<size_t> DecodeDigits(size_t index, size_t base, size_t n) {
  std::vector<size_t> digits(n);
  for (size_t i = n; i-- > 0;) {
    digits[i] = index % base;
    index /= base;
  }
  return digits;
}

double EvaluateOnAllPositions(const DataDistribution& dist,
                              const std::function<double(size_t)>& term) {
  double total = 0.0;
  for (size_t i = 0; i < dist.n(); ++i) total += term(i);
  return total;
}

}  // namespace

std::string FormatDouble(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

Dataset::Dataset(std::vector<double> elements) : elements_(std::move(elements)) {
  if (elements_.empty()) {
    throw ArgumentError(kModule, "a dataset needs at least one element");
  }
}

std::string Serialize(const Dataset& x) {
  std::string out;
  for (size_t i = 0; i < x.n(); ++i) {
    if (i > 0) out += ',';
    out += FormatDouble(x[i]);
  }
  return out;
}

size_t HammingDistance(const Dataset& x, const Dataset& y) {
  if (x.n() != y.n()) {
    throw ArgumentError(kModule, "hamming distance needs equal lengths, got " +
                                     std::to_string(x.n()) + " and " +
                                     std::to_string(y.n()));
  }
  size_t distance = 0;
  for (size_t i = 0; i < x.n(); ++i) distance += (x[i] != y[i]) ? 1 : 0;
  return distance;
}

DataDistribution::DataDistribution(DistributionKind kind, size_t n)
    : kind_(std::move(kind)), n_(n) {
  if (n_ == 0) throw ConfigError(kModule, "dataset size n must be positive");
  std::visit(
      Overloaded{
          [](const IidBernoulli& d) {
            if (!(d.p >= 0.0 && d.p <= 1.0)) {
              throw ConfigError(kModule, "bernoulli p must lie in [0, 1]");
            }
          },
          [](const IidGaussian& d) {
            if (!std::isfinite(d.mean) || !(d.sd > 0.0) ||
                !std::isfinite(d.sd)) {
              throw ConfigError(kModule,
                                "gaussian needs a finite mean and sd > 0");
            }
          },
          [](const MarkovChain& d) {
            const size_t m = d.initial.size();
            CheckProbabilityVector(d.initial, "markov initial distribution");
            if (d.transition.size() != m) {
              throw ConfigError(kModule,
                                "markov transition must be square with the "
                                "same size as the initial distribution");
            }
            for (const auto& row : d.transition) {
              if (row.size() != m) {
                throw ConfigError(kModule, "markov transition is not square");
              }
              CheckProbabilityVector(row, "markov transition row");
            }
          },
          [n](const CustomTable& d) {
            if (d.alphabet.empty()) {
              throw ConfigError(kModule, "custom table alphabet is empty");
            }
            const auto atoms = PowerWithin(d.alphabet.size(), n,
                                           std::numeric_limits<size_t>::max());
            if (!atoms || *atoms != d.probabilities.size()) {
              throw ConfigError(kModule,
                                "custom table needs |alphabet|^n "
                                "probabilities");
            }
            CheckProbabilityVector(d.probabilities, "custom table");
          },
      },
      kind_);
}

std::string_view DataDistribution::kind_name() const {
  return std::visit(Overloaded{
                        [](const IidBernoulli&) { return "iid_bernoulli"; },
                        [](const IidGaussian&) { return "iid_gaussian"; },
                        [](const MarkovChain&) { return "markov_chain"; },
                        [](const CustomTable&) { return "custom_table"; },
                    },
                    kind_);
}

Dataset DataDistribution::Sample(uint64_t seed) const {
  Rng rng(seed);
  std::vector<double> values(n_);
  std::visit(
      Overloaded{
          [&](const IidBernoulli& d) {
            for (auto& v : values) v = rng.Bernoulli(d.p) ? 1.0 : 0.0;
          },
          [&](const IidGaussian& d) {
            for (auto& v : values) v = d.mean + d.sd * rng.Normal();
          },
          [&](const MarkovChain& d) {
            size_t state = rng.Categorical(d.initial);
            values[0] = static_cast<double>(state);
            for (size_t i = 1; i < n_; ++i) {
              state = rng.Categorical(d.transition[state]);
              values[i] = static_cast<double>(state);
            }
          },
          [&](const CustomTable& d) {
            const size_t index = rng.Categorical(d.probabilities);
            const auto digits = DecodeDigits(index, d.alphabet.size(), n_);
            for (size_t i = 0; i < n_; ++i) values[i] = d.alphabet[digits[i]];
          },
      },
      kind_);
  return Dataset(std::move(values));
}

double DataDistribution::MarginalMean(size_t i) const {
  if (i >= n_) throw ArgumentError(kModule, "position out of range");
  return std::visit(
      Overloaded{
          [](const IidBernoulli& d) { return d.p; },
          [](const IidGaussian& d) { return d.mean; },
          [i](const MarkovChain& d) {
            std::vector<double> marginal = d.initial;
            for (size_t step = 0; step < i; ++step) {
              std::vector<double> next(marginal.size(), 0.0);
              for (size_t from = 0; from < marginal.size(); ++from) {
                for (size_t to = 0; to < marginal.size(); ++to) {
                  next[to] += marginal[from] * d.transition[from][to];
                }
              }
              marginal = std::move(next);
            }
            double mean = 0.0;
            for (size_t s = 0; s < marginal.size(); ++s) {
              mean += static_cast<double>(s) * marginal[s];
            }
            return mean;
          },
          [this, i](const CustomTable& d) {
            double mean = 0.0;
            for (size_t index = 0; index < d.probabilities.size(); ++index) {
              const auto digits = DecodeDigits(index, d.alphabet.size(), n_);
              mean += d.probabilities[index] * d.alphabet[digits[i]];
            }
            return mean;
          },
      },
      kind_);
}

std::vector<std::pair<Dataset, double>> DataDistribution::Enumerate(
    size_t max_atoms) const {
  std::vector<std::pair<Dataset, double>> atoms;
  auto too_many = [&] {
    return ArgumentError(kModule, "support of " + std::string(kind_name()) +
                                      " exceeds " + std::to_string(max_atoms) +
                                      " atoms");
  };
  std::visit(
      Overloaded{
          [&](const IidBernoulli& d) {
            const auto count = PowerWithin(2, n_, max_atoms);
            if (!count) throw too_many();
            for (size_t index = 0; index < *count; ++index) {
              const auto digits = DecodeDigits(index, 2, n_);
              double p = 1.0;
              std::vector<double> values(n_);
              for (size_t i = 0; i < n_; ++i) {
                values[i] = static_cast<double>(digits[i]);
                p *= digits[i] == 1 ? d.p : 1.0 - d.p;
              }
              if (p > 0.0) atoms.emplace_back(Dataset(std::move(values)), p);
            }
          },
          [&](const IidGaussian&) {
            throw ArgumentError(kModule,
                                "iid_gaussian has no finite enumeration");
          },
          [&](const MarkovChain& d) {
            const size_t m = d.initial.size();
            const auto count = PowerWithin(m, n_, max_atoms);
            if (!count) throw too_many();
            for (size_t index = 0; index < *count; ++index) {
              const auto digits = DecodeDigits(index, m, n_);
              double p = d.initial[digits[0]];
              for (size_t i = 1; i < n_; ++i) {
                p *= d.transition[digits[i - 1]][digits[i]];
              }
              std::vector<double> values(digits.begin(), digits.end());
              if (p > 0.0) atoms.emplace_back(Dataset(std::move(values)), p);
            }
          },
          [&](const CustomTable& d) {
            if (d.probabilities.size() > max_atoms) throw too_many();
            for (size_t index = 0; index < d.probabilities.size(); ++index) {
              if (d.probabilities[index] <= 0.0) continue;
              const auto digits = DecodeDigits(index, d.alphabet.size(), n_);
              std::vector<double> values(n_);
              for (size_t i = 0; i < n_; ++i) values[i] = d.alphabet[digits[i]];
              atoms.emplace_back(Dataset(std::move(values)),
                                 d.probabilities[index]);
            }
          },
      },
      kind_);
  return atoms;
}

DataDistribution DataDistribution::WithAnalyticMean(std::string query_id,
                                                    double value) const {
  DataDistribution copy = *this;
  copy.analytic_means_[std::move(query_id)] = value;
  return copy;
}

std::optional<double> DataDistribution::AnalyticMean(
    std::string_view query_id) const {
  const auto it = analytic_means_.find(query_id);
  if (it == analytic_means_.end()) return std::nullopt;
  return it->second;
}

Dataset SampleDataset(const DataDistribution& dist, uint64_t seed) {
  return dist.Sample(seed);
}

AnalyticMean AnalyticValue(double value) {
  return AnalyticMean{[value](const DataDistribution&) { return value; }};
}

QuerySpec::QuerySpec(std::string id, Evaluator evaluator,
                     QueryClass class_params,
                     std::optional<ExpectedValueMethod> method)
    : id_(std::move(id)),
      evaluator_(std::move(evaluator)),
      class_params_(std::move(class_params)),
      method_(std::move(method)) {
  if (!evaluator_) throw ConfigError(kModule, "query " + id_ + " has no evaluator");
  std::visit(Overloaded{
                 [&](const DeltaSensitive& c) {
                   if (!(c.delta > 0.0)) {
                     throw ConfigError(kModule, "query " + id_ +
                                                    ": sensitivity must be > 0");
                   }
                 },
                 [&](const Subgaussian& c) {
                   if (!(c.sigma > 0.0)) {
                     throw ConfigError(kModule,
                                       "query " + id_ + ": sigma must be > 0");
                   }
                 },
                 [&](const Subexponential& c) {
                   if (!(c.sigma > 0.0) || !(c.b > 0.0)) {
                     throw ConfigError(kModule, "query " + id_ +
                                                    ": sigma and b must be > 0");
                   }
                 },
                 [](const EmpiricalOnly&) {},
             },
             class_params_);
}

QuerySpec MeanQuery(QueryClass class_params) {
  return QuerySpec(
      "mean",
      [](const Dataset& x) {
        double total = 0.0;
        for (double v : x.elements()) total += v;
        return total / static_cast<double>(x.n());
      },
      std::move(class_params), AnalyticMean{[](const DataDistribution& d) {
        return EvaluateOnAllPositions(
                   d, [&](size_t i) { return d.MarginalMean(i); }) /
               static_cast<double>(d.n());
      }});
}

QuerySpec SumQuery(QueryClass class_params) {
  return QuerySpec(
      "sum",
      [](const Dataset& x) {
        double total = 0.0;
        for (double v : x.elements()) total += v;
        return total;
      },
      std::move(class_params), AnalyticMean{[](const DataDistribution& d) {
        return EvaluateOnAllPositions(
            d, [&](size_t i) { return d.MarginalMean(i); });
      }});
}

QuerySpec ConstantQuery(double value) {
  // Zero change under any substitution; the smallest positive sensitivity
  // stands in for zero.
  return QuerySpec(
      "constant", [value](const Dataset&) { return value; },
      DeltaSensitive{std::numeric_limits<double>::min()}, AnalyticValue(value));
}

QuerySpec VarianceQuery(int64_t trials) {
  return QuerySpec(
      "variance",
      [](const Dataset& x) {
        const double n = static_cast<double>(x.n());
        double mean = 0.0;
        for (double v : x.elements()) mean += v;
        mean /= n;
        double total = 0.0;
        for (double v : x.elements()) total += (v - mean) * (v - mean);
        return total / n;
      },
      EmpiricalOnly{}, MonteCarloMean{trials});
}

QuerySpec LinearQuery(std::string id, std::vector<double> coefficients,
                      double center, double scale, QueryClass class_params) {
  if (!(scale > 0.0)) throw ConfigError(kModule, "linear query scale must be > 0");
  auto shared = std::make_shared<const std::vector<double>>(std::move(coefficients));
  return QuerySpec(
      std::move(id),
      [shared, center, scale](const Dataset& x) {
        if (x.n() != shared->size()) {
          throw ArgumentError(kModule,
                              "linear query length does not match dataset");
        }
        double total = 0.0;
        for (size_t i = 0; i < x.n(); ++i) {
          total += (*shared)[i] * (x[i] - center) / scale;
        }
        return total;
      },
      std::move(class_params),
      AnalyticMean{[shared, center, scale](const DataDistribution& d) {
        if (d.n() != shared->size()) {
          throw ArgumentError(kModule,
                              "linear query length does not match distribution");
        }
        double total = 0.0;
        for (size_t i = 0; i < d.n(); ++i) {
          total += (*shared)[i] * (d.MarginalMean(i) - center) / scale;
        }
        return total;
      }});
}

ExpectedValue ComputeExpectedValue(const DataDistribution& dist,
                                   const QuerySpec& q, uint64_t seed,
                                   int threads) {
  const auto& method = q.expected_value_method();
  if (method && std::holds_alternative<AnalyticMean>(*method)) {
    return ExpectedValue{std::get<AnalyticMean>(*method).value(dist), 0.0, 0,
                         true};
  }
  if (const auto registered = dist.AnalyticMean(q.id())) {
    return ExpectedValue{*registered, 0.0, 0, true};
  }
  if (!method) {
    throw ConfigError(kModule, "query " + q.id() +
                                   " has no expected-value method and no "
                                   "registered analytic mean");
  }
  const int64_t trials = std::get<MonteCarloMean>(*method).trials;
  if (trials < kMinMonteCarloTrials) {
    throw ArgumentError(kModule, "Monte Carlo expected value needs at least " +
                                     std::to_string(kMinMonteCarloTrials) +
                                     " trials");
  }
  std::vector<double> values(static_cast<size_t>(trials));
  ParallelFor(values.size(), threads, [&](size_t t) {
    values[t] = q(dist.Sample(DeriveSeed(seed, t)));
  });
  RunningMoments moments;
  for (double v : values) moments.Add(v);
  return ExpectedValue{moments.mean(), moments.standard_error(), trials, false};
}

StabilityParams::StabilityParams(double eta, double tau, double nu)
    : eta_(eta), tau_(tau), nu_(nu) {
  if (!(eta > 0.0)) throw ArgumentError(kModule, "eta must be > 0");
  if (!(tau >= 0.0)) throw ArgumentError(kModule, "tau must be >= 0");
  if (!(nu >= 0.0 && nu < 1.0)) {
    throw ArgumentError(kModule, "nu must lie in [0, 1)");
  }
}

}  // namespace typstab
