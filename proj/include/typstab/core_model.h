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

// Domain types shared by every module: datasets, data distributions over
// X^n, real-valued queries with their concentration class, and stability
// parameter triples.

#ifndef TYPSTAB_CORE_MODEL_H_
#define TYPSTAB_CORE_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace typstab {

// An ordered sequence of n >= 1 scalar data points. Categorical symbols are
// stored as their integer code.
class Dataset {
 public:
  explicit Dataset(std::vector<double> elements);

  size_t n() const { return elements_.size(); }
  double operator[](size_t i) const { return elements_[i]; }
  std::span<const double> elements() const { return elements_; }

  bool operator==(const Dataset& other) const = default;

 private:
  std::vector<double> elements_;
};

// Comma-separated elements, each printed with 17 significant digits.
std::string Serialize(const Dataset& x);

// Number of positions where x and y differ. Throws ArgumentError on a length
// mismatch.
size_t HammingDistance(const Dataset& x, const Dataset& y);

struct IidBernoulli {
  double p;
};

struct IidGaussian {
  double mean;
  double sd;
};

// States are coded 0..m-1 and the data point value is the state code.
struct MarkovChain {
  std::vector<std::vector<double>> transition;
  std::vector<double> initial;
};

// A joint table over alphabet^n. Entry `i` of `probabilities` is the dataset
// whose base-m digits of i (most significant first) index into `alphabet`.
struct CustomTable {
  std::vector<double> alphabet;
  std::vector<double> probabilities;
};

using DistributionKind =
    std::variant<IidBernoulli, IidGaussian, MarkovChain, CustomTable>;

// A seeded sampler over X^n. Immutable after construction.
class DataDistribution {
 public:
  // Throws ConfigError on malformed parameters.
  DataDistribution(DistributionKind kind, size_t n);

  const DistributionKind& kind() const { return kind_; }
  std::string_view kind_name() const;
  size_t n() const { return n_; }

  Dataset Sample(uint64_t seed) const;

  // E[X_i] for the data point at position i.
  double MarginalMean(size_t i) const;

  // All datasets with positive probability. Throws ArgumentError for
  // continuous distributions or when the support exceeds max_atoms.
  std::vector<std::pair<Dataset, double>> Enumerate(size_t max_atoms) const;

  // Registers a closed-form expectation for the query with the given id.
  DataDistribution WithAnalyticMean(std::string query_id, double value) const;
  std::optional<double> AnalyticMean(std::string_view query_id) const;

 private:
  DistributionKind kind_;
  size_t n_;
  std::map<std::string, double, std::less<>> analytic_means_;
};

Dataset SampleDataset(const DataDistribution& dist, uint64_t seed);

// Concentration class declared for a query.
struct DeltaSensitive {
  double delta;
};
struct Subgaussian {
  double sigma;
};
struct Subexponential {
  double sigma;
  double b;
};
struct EmpiricalOnly {};

using QueryClass =
    std::variant<DeltaSensitive, Subgaussian, Subexponential, EmpiricalOnly>;

// How the expected value of a query is obtained.
struct AnalyticMean {
  std::function<double(const DataDistribution&)> value;
};
struct MonteCarloMean {
  int64_t trials;
};
using ExpectedValueMethod = std::variant<AnalyticMean, MonteCarloMean>;

AnalyticMean AnalyticValue(double value);

class QuerySpec {
 public:
  using Evaluator = std::function<double(const Dataset&)>;

  // Throws ConfigError on non-positive class parameters.
  QuerySpec(std::string id, Evaluator evaluator, QueryClass class_params,
            std::optional<ExpectedValueMethod> method = std::nullopt);

  const std::string& id() const { return id_; }
  const QueryClass& class_params() const { return class_params_; }
  const std::optional<ExpectedValueMethod>& expected_value_method() const {
    return method_;
  }

  double operator()(const Dataset& x) const { return evaluator_(x); }

 private:
  std::string id_;
  Evaluator evaluator_;
  QueryClass class_params_;
  std::optional<ExpectedValueMethod> method_;
};

// Stock queries. Their analytic means hold for every distribution kind.
QuerySpec MeanQuery(QueryClass class_params);
QuerySpec SumQuery(QueryClass class_params);
QuerySpec ConstantQuery(double value);
// (1/n) sum (x_i - mean(x))^2, estimated by Monte Carlo with `trials` draws.
QuerySpec VarianceQuery(int64_t trials);
// sum_i c_i (x_i - center) / scale.
QuerySpec LinearQuery(std::string id, std::vector<double> coefficients,
                      double center, double scale, QueryClass class_params);

struct ExpectedValue {
  double value = 0.0;
  double standard_error = 0.0;
  int64_t trials = 0;
  bool analytic = false;
};

// mu_q = E_{T~P}[q(T)]. Preference order: the query's analytic method, a
// mean registered on the distribution, then Monte Carlo (trials >= 10^4).
ExpectedValue ComputeExpectedValue(const DataDistribution& dist,
                                   const QuerySpec& q, uint64_t seed = 0,
                                   int threads = 1);

inline constexpr int64_t kMinMonteCarloTrials = 10'000;

// The (eta, tau, nu) triple of a typically stable algorithm.
class StabilityParams {
 public:
  // Throws ArgumentError unless eta > 0, tau >= 0 and 0 <= nu < 1.
  StabilityParams(double eta, double tau, double nu);

  double eta() const { return eta_; }
  double tau() const { return tau_; }
  double nu() const { return nu_; }

  bool operator==(const StabilityParams& other) const = default;

 private:
  double eta_;
  double tau_;
  double nu_;
};

// "%.17g" formatting shared by serializers.
std::string FormatDouble(double value);

}  // namespace typstab

#endif  // TYPSTAB_CORE_MODEL_H_
