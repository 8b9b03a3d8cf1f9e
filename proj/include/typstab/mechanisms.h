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

// Noise mechanisms calibrated to the confidence width of a concentrated
// query rather than to its global sensitivity.
//
// Given gamma_n, eta and nu, the half-width alpha is the smallest value with
// gamma_n(alpha) >= ln(1/nu). The Laplace mechanism answers q(x) + Lap(alpha /
// eta) and is (eta, 0, nu)-typically stable; the Gaussian mechanism answers
// q(x) + N(0, sigma^2) with sigma = alpha sqrt(2 ln(1.5 / tau)) / eta and is
// (eta, tau, nu)-typically stable. In both cases the reference oracle W(P)
// adds the same noise to mu_q = E_{T~P} q(T).

#ifndef TYPSTAB_MECHANISMS_H_
#define TYPSTAB_MECHANISMS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "typstab/concentration.h"
#include "typstab/core_model.h"

namespace typstab {

enum class NoiseKind { kLaplace, kGaussian };

const char* NoiseKindName(NoiseKind kind);

class CalibratedNoiseMechanism {
 public:
  // Throws ArgumentError unless alpha > 0, eta > 0 (and tau in (0, 1)).
  static CalibratedNoiseMechanism Laplace(double alpha, double eta);
  static CalibratedNoiseMechanism Gaussian(double alpha, double eta, double tau);
  // alpha = f.AlphaFor(nu); InfeasibleError propagates.
  static CalibratedNoiseMechanism CalibrateLaplace(const ConcentrationFunction& f,
                                                   double eta, double nu);
  static CalibratedNoiseMechanism CalibrateGaussian(
      const ConcentrationFunction& f, double eta, double tau, double nu);

  NoiseKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double eta() const { return eta_; }
  // Zero for Laplace.
  double tau() const { return tau_; }
  // Laplace scale alpha/eta, or the Gaussian standard deviation.
  double scale() const { return scale_; }

  double DrawNoise(uint64_t seed) const;
  // Density of the centered noise at x.
  double NoiseDensity(double x) const;
  // Pr[|noise| >= t].
  double TailProbability(double t) const;
  // The textbook Gaussian-mechanism argument applies for eta <= 1. Always
  // true for Laplace.
  bool certificate_valid() const;

 private:
  CalibratedNoiseMechanism(NoiseKind kind, double alpha, double eta, double tau,
                           double scale)
      : kind_(kind), alpha_(alpha), eta_(eta), tau_(tau), scale_(scale) {}

  NoiseKind kind_;
  double alpha_;
  double eta_;
  double tau_;
  double scale_;
};

// What a released answer exposes.
struct ReleasedAnswer {
  double w = 0.0;
  std::string query_id;
};

struct MechanismOutput {
  double w = 0.0;
  std::string query_id;
  uint64_t noise_draw_seed = 0;
  // Bookkeeping for experiments; stripped by Release().
  double true_query_value = 0.0;

  ReleasedAnswer Release() const { return ReleasedAnswer{w, query_id}; }
};

// q(x) + noise drawn from `seed`.
MechanismOutput ApplyMechanism(const CalibratedNoiseMechanism& mech,
                               const QuerySpec& q, const Dataset& x,
                               uint64_t seed);

MechanismOutput LaplaceMechanism(const QuerySpec& q, const Dataset& x, double eta,
                                 double nu, const ConcentrationFunction& f,
                                 uint64_t seed);

MechanismOutput GaussianMechanism(const QuerySpec& q, const Dataset& x,
                                  double eta, double tau, double nu,
                                  const ConcentrationFunction& f, uint64_t seed);

// W(P): mu_q plus a draw of the same noise as `mech`.
MechanismOutput OracleMechanism(double mu_q, const CalibratedNoiseMechanism& mech,
                                uint64_t seed,
                                std::string query_id = "oracle");

// With probability >= 1 - beta over the noise, |w - q(x)| is below these.
// Throw ArgumentError unless beta in (0, 1) and the other parameters are valid.
double LaplaceErrorBound(double alpha, double eta, double beta);
double GaussianErrorBound(double alpha, double eta, double tau, double beta);

struct DensityRatioCertificate {
  NoiseKind kind = NoiseKind::kLaplace;
  // Laplace: sup_w |ln(density_x(w) / density_oracle(w))| = (eta/alpha) offset.
  // Gaussian: the effective eta (eta offset / alpha) of the classical
  // argument at the configured tau.
  double eta = 0.0;
  double tau = 0.0;
  // Laplace: offset <= alpha. Gaussian: offset <= alpha and eta <= 1.
  bool valid = false;
  // Exact hockey-stick divergence between the mechanism on x and the oracle
  // at level `mech.eta()`; zero for Laplace when valid.
  double exact_tau = 0.0;
};

// Certificate for |q(x) - mu_q| = offset. Throws ArgumentError for offset < 0.
DensityRatioCertificate CertifyDensityRatio(const CalibratedNoiseMechanism& mech,
                                            double offset);

// Exact sup_O (Pr[N(shift, s^2) in O] - e^eps Pr[N(0, s^2) in O]).
double GaussianHockeyStick(double shift, double sd, double eps);

// A fully enumerable mechanism: dataset atoms with probabilities, a finite
// output alphabet {0, ..., m-1}, one output distribution per atom, and the
// oracle's output distribution.
class DiscreteInstance {
 public:
  static constexpr size_t kMaxAtoms = 16;

  // Throws ArgumentError unless every row (and the atom distribution) is a
  // probability vector within 1e-12, sizes agree, and counts are <= 16.
  DiscreteInstance(std::vector<Dataset> dataset_atoms,
                   std::vector<double> atom_probabilities,
                   std::vector<std::vector<double>> conditional_table,
                   std::vector<double> oracle_row);

  // Oracle row = output marginal sum_x P(x) row_x, i.e. the mechanism run on
  // an independent draw Y ~ P.
  static DiscreteInstance WithMarginalOracle(
      std::vector<Dataset> dataset_atoms, std::vector<double> atom_probabilities,
      std::vector<std::vector<double>> conditional_table);

  size_t atom_count() const { return atoms_.size(); }
  size_t output_count() const { return oracle_row_.size(); }
  const Dataset& atom(size_t i) const { return atoms_[i]; }
  std::span<const double> atom_probabilities() const { return atom_probabilities_; }
  std::span<const double> row(size_t i) const { return table_[i]; }
  std::span<const double> oracle_row() const { return oracle_row_; }

  // Index of the atom equal to x. Throws ArgumentError if absent.
  size_t AtomIndex(const Dataset& x) const;

  // max over atoms with positive mass and outputs of
  // |ln(row(z) / oracle(z))|; infinity on a support mismatch.
  double MaxAbsLogRatio() const;

  // The same instance with every row and the oracle row pushed through a
  // stochastic output channel (channel[z][u] = Pr[u | z]).
  DiscreteInstance PostProcess(
      const std::vector<std::vector<double>>& channel) const;

 private:
  std::vector<Dataset> atoms_;
  std::vector<double> atom_probabilities_;
  std::vector<std::vector<double>> table_;
  std::vector<double> oracle_row_;
};

// Throws InfeasibleError when instance.MaxAbsLogRatio() > eta_target + 1e-12.
void RequireLogRatioBound(const DiscreteInstance& instance, double eta_target);

// One-sided randomized response over two equiprobable atoms: atom "1"
// reports (1 - bias, bias), atom "0" reports a fair coin, and the oracle row
// is the output marginal. The max |log ratio| is ln((bias + 1/2) / (2 bias)),
// which is ln 1.5 at bias = 1/4. Throws ArgumentError unless bias in
// (0, 0.5) and eta_target > 0, InfeasibleError when the bound is not met.
DiscreteInstance DiscreteReferenceMechanism(double bias, double eta_target);

// The bias whose reference instance has max |log ratio| exactly eta.
double ReferenceBiasForEta(double eta);

}  // namespace typstab

#endif  // TYPSTAB_MECHANISMS_H_
