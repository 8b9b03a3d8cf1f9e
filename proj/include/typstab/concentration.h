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

// Concentration functions gamma_n for the supported query classes.
//
// A query q is gamma_n-concentrated under P when
//   Pr[|q(X) - E q(Y)| > alpha] < exp(-gamma_n(alpha))   for every alpha > 0.
// The closed forms are
//   McDiarmid (Delta-sensitive, product P):  2 alpha^2 / (n Delta^2)
//   sigma-subgaussian:                        alpha^2 / (2 sigma^2)
//   (sigma, b)-subexponential, as stated:     min(alpha^2/(2 sigma^2),
//                                                 sigma^2/(2 b^2))
//   (sigma, b)-subexponential, Bernstein:     min(alpha^2/(2 sigma^2),
//                                                 alpha/(2 b))
// The "as stated" subexponential form is constant in alpha past
// alpha = sigma^2 / b, so AlphaFor is infeasible once ln(1/nu) exceeds
// sigma^2 / (2 b^2).

#ifndef TYPSTAB_CONCENTRATION_H_
#define TYPSTAB_CONCENTRATION_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "typstab/core_model.h"

namespace typstab {

enum class SubexponentialVariant { kAsStated, kStandardBernstein };

class ConcentrationFunction {
 public:
  struct McDiarmidForm {
    double delta;
    size_t n;
  };
  struct SubgaussianForm {
    double sigma;
  };
  struct SubexponentialForm {
    double sigma;
    double b;
    SubexponentialVariant variant;
  };
  // Monotone (alpha, gamma) knots, interpolated linearly with an implicit
  // knot at (0, 0) and held constant past the last knot.
  struct CustomForm {
    std::vector<std::pair<double, double>> table;
  };
  using Form =
      std::variant<McDiarmidForm, SubgaussianForm, SubexponentialForm, CustomForm>;

  static ConcentrationFunction McDiarmid(double delta, size_t n);
  static ConcentrationFunction Subgaussian(double sigma);
  static ConcentrationFunction Subexponential(
      double sigma, double b,
      SubexponentialVariant variant = SubexponentialVariant::kAsStated);
  static ConcentrationFunction Custom(
      std::vector<std::pair<double, double>> table);
  // The certificate a query class provides for datasets of size n. Throws
  // ArgumentError for EmpiricalOnly.
  static ConcentrationFunction ForQueryClass(const QueryClass& cls, size_t n);

  const Form& form() const { return form_; }
  bool closed_form() const { return !std::holds_alternative<CustomForm>(form_); }
  std::string Describe() const;

  // gamma_n(alpha). Throws ArgumentError for alpha < 0.
  double Gamma(double alpha) const;

  // Smallest alpha with gamma_n(alpha) >= ln(1/nu), nu in (0, 1). Closed forms
  // are inverted analytically; custom tables by bisection. Throws
  // InfeasibleError when gamma_n never reaches ln(1/nu).
  double AlphaFor(double nu) const;
  // Same, with the level ln(1/nu) given directly.
  double AlphaForLevel(double log_inverse_nu) const;
  // Bisection inversion for any form: doubling bracket from alpha = 1, then
  // bisection to 1e-10 relative width. Returns the upper bracket end.
  double AlphaForLevelByBisection(double log_inverse_nu) const;

 private:
  explicit ConcentrationFunction(Form form) : form_(std::move(form)) {}

  Form form_;
};

inline double GammaOf(const ConcentrationFunction& f, double alpha) {
  return f.Gamma(alpha);
}
inline double AlphaFor(const ConcentrationFunction& f, double nu) {
  return f.AlphaFor(nu);
}

struct CertificationRow {
  double alpha = 0.0;
  int64_t exceedances = 0;
  int64_t trials = 0;
  double frequency = 0.0;
  // frequency + 3 binomial standard errors.
  double ci_upper = 0.0;
  // exp(-gamma_n(alpha)).
  double bound = 0.0;
  bool pass = false;
};

struct CertificationReport {
  double mean = 0.0;
  double mean_standard_error = 0.0;
  std::vector<CertificationRow> rows;
  bool all_pass = false;
};

// Empirical check of Pr[|q(X) - mu_q| > alpha] < exp(-gamma_n(alpha)) on an
// alpha grid. A row passes when its upper 3-sigma endpoint is below the bound
// or the frequency is within 3 binomial standard errors (at the bound) of it.
// Needs trials >= 10^4.
CertificationReport CertifyConcentration(const DataDistribution& dist,
                                         const QuerySpec& q,
                                         const ConcentrationFunction& f,
                                         std::span<const double> alphas,
                                         int64_t trials, uint64_t seed,
                                         int threads = 1);

}  // namespace typstab

#endif  // TYPSTAB_CONCENTRATION_H_
