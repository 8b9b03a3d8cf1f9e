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

#include "typstab/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "typstab/errors.h"
#include "typstab/random.h"
#include "typstab/stats.h"

namespace typstab {
namespace {

constexpr char kModule[] = "mechanisms";
constexpr double kRowTolerance = 1e-12;

void RequirePositive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ArgumentError(kModule, std::string(name) + " must be a positive finite number");
  }
}

void RequireOpenUnit(double value, const char* name) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ArgumentError(kModule, std::string(name) + " must lie in (0, 1)");
  }
}

void RequireDistribution(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ArgumentError(kModule, std::string(what) + " has an entry outside [0, 1]");
    }
    total += v;
  }
  if (std::fabs(total - 1.0) > kRowTolerance) {
    throw ArgumentError(kModule, std::string(what) + " sums to " +
                                     FormatDouble(total) + ", not 1");
  }
}

double GaussianSigma(double alpha, double eta, double tau) {
  return alpha * std::sqrt(2.0 * std::log(1.5 / tau)) / eta;
}

}  // namespace

const char* NoiseKindName(NoiseKind kind) {
  return kind == NoiseKind::kLaplace ? "laplace" : "gaussian";
}

CalibratedNoiseMechanism CalibratedNoiseMechanism::Laplace(double alpha,
                                                           double eta) {
  RequirePositive(alpha, "alpha");
  RequirePositive(eta, "eta");
  return CalibratedNoiseMechanism(NoiseKind::kLaplace, alpha, eta, 0.0,
                                  alpha / eta);
}

CalibratedNoiseMechanism CalibratedNoiseMechanism::Gaussian(double alpha,
                                                            double eta,
                                                            double tau) {
  RequirePositive(alpha, "alpha");
  RequirePositive(eta, "eta");
  RequireOpenUnit(tau, "tau");
  return CalibratedNoiseMechanism(NoiseKind::kGaussian, alpha, eta, tau,
                                  GaussianSigma(alpha, eta, tau));
}

CalibratedNoiseMechanism CalibratedNoiseMechanism::CalibrateLaplace(
    const ConcentrationFunction& f, double eta, double nu) {
  RequirePositive(eta, "eta");
  RequireOpenUnit(nu, "nu");
  return Laplace(f.AlphaFor(nu), eta);
}

CalibratedNoiseMechanism CalibratedNoiseMechanism::CalibrateGaussian(
    const ConcentrationFunction& f, double eta, double tau, double nu) {
  RequirePositive(eta, "eta");
  RequireOpenUnit(tau, "tau");
  RequireOpenUnit(nu, "nu");
  return Gaussian(f.AlphaFor(nu), eta, tau);
}

double CalibratedNoiseMechanism::DrawNoise(uint64_t seed) const {
  Rng rng(seed);
  return kind_ == NoiseKind::kLaplace ? rng.Laplace(scale_)
                                      : scale_ * rng.Normal();
}

double CalibratedNoiseMechanism::NoiseDensity(double x) const {
  if (kind_ == NoiseKind::kLaplace) {
    return std::exp(-std::fabs(x) / scale_) / (2.0 * scale_);
  }
  const double z = x / scale_;
  return std::exp(-0.5 * z * z) / (scale_ * std::sqrt(2.0 * std::numbers::pi));
}

double CalibratedNoiseMechanism::TailProbability(double t) const {
  if (t <= 0.0) return 1.0;
  if (kind_ == NoiseKind::kLaplace) return std::exp(-t / scale_);
  return 2.0 * NormalSurvival(t / scale_);
}

bool CalibratedNoiseMechanism::certificate_valid() const {
  return kind_ == NoiseKind::kLaplace || eta_ <= 1.0;
}

MechanismOutput ApplyMechanism(const CalibratedNoiseMechanism& mech,
                               const QuerySpec& q, const Dataset& x,
                               uint64_t seed) {
  const double value = q(x);
  return MechanismOutput{value + mech.DrawNoise(seed), q.id(), seed, value};
}

MechanismOutput LaplaceMechanism(const QuerySpec& q, const Dataset& x, double eta,
                                 double nu, const ConcentrationFunction& f,
                                 uint64_t seed) {
  return ApplyMechanism(CalibratedNoiseMechanism::CalibrateLaplace(f, eta, nu), q,
                        x, seed);
}

MechanismOutput GaussianMechanism(const QuerySpec& q, const Dataset& x,
                                  double eta, double tau, double nu,
                                  const ConcentrationFunction& f,
                                  uint64_t seed) {
  return ApplyMechanism(
      CalibratedNoiseMechanism::CalibrateGaussian(f, eta, tau, nu), q, x, seed);
}

MechanismOutput OracleMechanism(double mu_q, const CalibratedNoiseMechanism& mech,
                                uint64_t seed, std::string query_id) {
  return MechanismOutput{mu_q + mech.DrawNoise(seed), std::move(query_id), seed,
                         mu_q};
}

double LaplaceErrorBound(double alpha, double eta, double beta) {
  RequirePositive(alpha, "alpha");
  RequirePositive(eta, "eta");
  RequireOpenUnit(beta, "beta");
  return alpha * std::log(1.0 / beta) / eta;
}

double GaussianErrorBound(double alpha, double eta, double tau, double beta) {
  RequirePositive(alpha, "alpha");
  RequirePositive(eta, "eta");
  RequireOpenUnit(tau, "tau");
  RequireOpenUnit(beta, "beta");
  return 2.0 * alpha * std::sqrt(std::log(1.5 / tau) * std::log(1.0 / beta)) /
         eta;
}

double GaussianHockeyStick(double shift, double sd, double eps) {
  shift = std::fabs(shift);
  if (shift == 0.0) return std::max(0.0, 1.0 - std::exp(eps));
  const double a = shift / (2.0 * sd);
  const double b = eps * sd / shift;
  return std::max(0.0, NormalCdf(a - b) - std::exp(eps) * NormalCdf(-a - b));
}

DensityRatioCertificate CertifyDensityRatio(const CalibratedNoiseMechanism& mech,
                                            double offset) {
  if (!(offset >= 0.0)) throw ArgumentError(kModule, "offset must be >= 0");
  DensityRatioCertificate cert;
  cert.kind = mech.kind();
  cert.eta = mech.eta() * offset / mech.alpha();
  if (mech.kind() == NoiseKind::kLaplace) {
    cert.tau = 0.0;
    cert.valid = offset <= mech.alpha();
    cert.exact_tau = 0.0;
    if (!cert.valid) {
      // Ratio is still exactly e^{eta offset/alpha}; the divergence at level
      // eta is positive.
      const double b = mech.scale();
      const double t = offset;
      // sup_O P[L + t in O] - e^eta P[L in O] for Laplace(b).
      // Attained on O = {w > (t + b eta) / 2}.
      const double cut = 0.5 * (t + b * mech.eta());
      auto upper = [b](double c) {  // P[L >= c]
        return c >= 0.0 ? 0.5 * std::exp(-c / b) : 1.0 - 0.5 * std::exp(c / b);
      };
      cert.exact_tau = std::max(
          0.0, upper(cut - t) - std::exp(mech.eta()) * upper(cut));
    }
    return cert;
  }
  cert.tau = mech.tau();
  cert.valid = offset <= mech.alpha() && mech.certificate_valid();
  cert.exact_tau = GaussianHockeyStick(offset, mech.scale(), mech.eta());
  return cert;
}

DiscreteInstance::DiscreteInstance(std::vector<Dataset> dataset_atoms,
                                   std::vector<double> atom_probabilities,
                                   std::vector<std::vector<double>> conditional_table,
                                   std::vector<double> oracle_row)
    : atoms_(std::move(dataset_atoms)),
      atom_probabilities_(std::move(atom_probabilities)),
      table_(std::move(conditional_table)),
      oracle_row_(std::move(oracle_row)) {
  if (atoms_.empty() || atoms_.size() > kMaxAtoms) {
    throw ArgumentError(kModule, "a discrete instance needs 1 to 16 dataset atoms");
  }
  if (oracle_row_.empty() || oracle_row_.size() > kMaxAtoms) {
    throw ArgumentError(kModule, "a discrete instance needs 1 to 16 outputs");
  }
  if (atom_probabilities_.size() != atoms_.size() ||
      table_.size() != atoms_.size()) {
    throw ArgumentError(kModule, "one probability and one row per dataset atom");
  }
  RequireDistribution(atom_probabilities_, "dataset atom distribution");
  RequireDistribution(oracle_row_, "oracle row");
  for (const auto& row : table_) {
    if (row.size() != oracle_row_.size()) {
      throw ArgumentError(kModule, "every row needs one entry per output");
    }
    RequireDistribution(row, "conditional row");
  }
}

DiscreteInstance DiscreteInstance::WithMarginalOracle(
    std::vector<Dataset> dataset_atoms, std::vector<double> atom_probabilities,
    std::vector<std::vector<double>> conditional_table) {
  if (conditional_table.empty() ||
      conditional_table.size() != atom_probabilities.size()) {
    throw ArgumentError(kModule, "one probability and one row per dataset atom");
  }
  std::vector<double> marginal(conditional_table.front().size(), 0.0);
  for (size_t x = 0; x < conditional_table.size(); ++x) {
    if (conditional_table[x].size() != marginal.size()) {
      throw ArgumentError(kModule, "every row needs one entry per output");
    }
    for (size_t z = 0; z < marginal.size(); ++z) {
      marginal[z] += atom_probabilities[x] * conditional_table[x][z];
    }
  }
  return DiscreteInstance(std::move(dataset_atoms), std::move(atom_probabilities),
                          std::move(conditional_table), std::move(marginal));
}

size_t DiscreteInstance::AtomIndex(const Dataset& x) const {
  for (size_t i = 0; i < atoms_.size(); ++i) {
    if (atoms_[i] == x) return i;
  }
  throw ArgumentError(kModule, "dataset " + Serialize(x) +
                                   " is not an atom of this instance");
}

double DiscreteInstance::MaxAbsLogRatio() const {
  double worst = 0.0;
  for (size_t x = 0; x < atoms_.size(); ++x) {
    if (atom_probabilities_[x] <= 0.0) continue;
    for (size_t z = 0; z < oracle_row_.size(); ++z) {
      const double p = table_[x][z];
      const double q = oracle_row_[z];
      if (p == 0.0 && q == 0.0) continue;
      if (p == 0.0 || q == 0.0) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::fabs(std::log(p / q)));
    }
  }
  return worst;
}

DiscreteInstance DiscreteInstance::PostProcess(
    const std::vector<std::vector<double>>& channel) const {
  if (channel.size() != oracle_row_.size()) {
    throw ArgumentError(kModule, "channel needs one row per output");
  }
  const size_t outputs = channel.front().size();
  for (const auto& row : channel) {
    if (row.size() != outputs) {
      throw ArgumentError(kModule, "channel rows must have equal length");
    }
    RequireDistribution(row, "channel row");
  }
  auto push = [&](std::span<const double> p) {
    std::vector<double> out(outputs, 0.0);
    for (size_t z = 0; z < p.size(); ++z) {
      for (size_t u = 0; u < outputs; ++u) out[u] += p[z] * channel[z][u];
    }
    return out;
  };
  std::vector<std::vector<double>> table;
  table.reserve(table_.size());
  for (const auto& row : table_) table.push_back(push(row));
  return DiscreteInstance(atoms_, atom_probabilities_, std::move(table),
                          push(oracle_row_));
}

void RequireLogRatioBound(const DiscreteInstance& instance, double eta_target) {
  const double worst = instance.MaxAbsLogRatio();
  if (!(worst <= eta_target + kRowTolerance)) {
    throw InfeasibleError(kModule, "max |log ratio| " + FormatDouble(worst) +
                                       " exceeds eta target " +
                                       FormatDouble(eta_target));
  }
}

DiscreteInstance DiscreteReferenceMechanism(double bias, double eta_target) {
  if (!(bias > 0.0 && bias < 0.5)) {
    throw ArgumentError(kModule, "bias must lie in (0, 0.5)");
  }
  RequirePositive(eta_target, "eta target");
  auto instance = DiscreteInstance::WithMarginalOracle(
      {Dataset({0.0}), Dataset({1.0})}, {0.5, 0.5},
      {{0.5, 0.5}, {1.0 - bias, bias}});
  RequireLogRatioBound(instance, eta_target);
  return instance;
}

double ReferenceBiasForEta(double eta) {
  RequirePositive(eta, "eta");
  return 0.5 / (2.0 * std::exp(eta) - 1.0);
}

}  // namespace typstab
