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

#include <algorithm>
#include <cmath>
#include <limits>

#include "typstab/errors.h"
#include "typstab/random.h"
#include "typstab/verifier.h"

namespace typstab {
namespace {

constexpr char kModule[] = "composition";
constexpr double kSlack = 1e-12;
// e^700 is within a factor e^9 of the largest double.
constexpr double kLogOverflowGuard = 700.0;

void RequireK(int k) {
  if (k < 1) throw ArgumentError(kModule, "k must be >= 1");
}

void RequireOpenUnit(double value, const char* name) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ArgumentError(kModule, std::string(name) + " must lie in (0, 1)");
  }
}

ComposedParams Finalize(const StepParams& last) {
  ComposedParams out;
  out.eta = 3.0 * last.eta;
  out.tau = 5.0 * last.tau;
  out.nu = out.tau;
  out.vacuous = out.tau >= 1.0 || out.nu >= 1.0;
  return out;
}

// Shared shape of both schedules:
//   eta_j = lead sqrt(j) + j drift
//   tau_j = (j per_step + base + sum_{t<j} e^{eta_t} base)^{1/2}
std::vector<StepParams> BuildSchedule(int k, double lead, double drift,
                                      double per_step, double base) {
  std::vector<StepParams> steps;
  steps.reserve(static_cast<size_t>(k));
  // sum_{t<j} e^{eta_t}, with its logarithm tracked as well so the product
  // with a tiny base stays finite after e^{eta_t} itself overflows.
  double exp_sum = 0.0;
  double log_exp_sum = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= k; ++j) {
    StepParams s;
    s.eta = lead * std::sqrt(static_cast<double>(j)) + j * drift;
    const double linear = j * per_step + base;
    if (log_exp_sum < kLogOverflowGuard || base == 0.0) {
      s.tau = std::sqrt(linear + exp_sum * base);
    } else {
      // tau_j^2 may not fit in a double either.
      const double log_earlier = log_exp_sum + std::log(base);
      s.tau = std::exp(
          0.5 * (log_earlier + std::log1p(linear * std::exp(-log_earlier))));
    }
    s.nu = s.tau;
    steps.push_back(s);
    exp_sum += std::exp(s.eta);
    const double hi = std::max(log_exp_sum, s.eta);
    log_exp_sum = hi + std::log(std::exp(log_exp_sum - hi) + std::exp(s.eta - hi));
  }
  return steps;
}

}  // namespace

StabilityParams NonAdaptiveCompose(const StabilityParams& p, int k) {
  RequireK(k);
  if (k * p.nu() >= 1.0) {
    throw ArgumentError(kModule, "k nu = " + FormatDouble(k * p.nu()) +
                                     " leaves no typical set");
  }
  return StabilityParams(k * p.eta(), k * p.tau(), k * p.nu());
}

ApproxCompositionConstants ComputeApproxConstants(double eta, double tau) {
  if (!(eta > 0.0)) throw ArgumentError(kModule, "eta must be > 0");
  if (!(tau >= 0.0)) throw ArgumentError(kModule, "tau must be >= 0");
  ApproxCompositionConstants c;
  if (tau == 0.0) return c;
  const double e = std::exp(eta);
  const double e2 = std::exp(2.0 * eta);
  c.tau_hat = 2.0 * tau / -std::expm1(-eta);
  const double em1 = std::expm1(eta);
  const double bracket =
      4.0 * e2 + 4.0 * e - 3.0 - 2.0 / e + 1.0 / e2;
  c.psi_tau = tau * (2.0 * e + 1.0) +
              tau * tau * (1.0 + 2.0 * e2 / (em1 * em1) * bracket);
  return c;
}

CompositionSchedule PureAdaptiveCompose(double eta, double nu, int k,
                                        double tau_prime) {
  RequireK(k);
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw ArgumentError(kModule, "eta must be a positive finite number");
  }
  if (!(nu >= 0.0 && nu < 1.0)) throw ArgumentError(kModule, "nu must lie in [0, 1)");
  RequireOpenUnit(tau_prime, "tau'");

  CompositionSchedule s;
  s.regime = CompositionRegime::kPure;
  s.k = k;
  s.tau_prime = tau_prime;
  s.beyond_stated_range = k < 2;
  s.per_step = BuildSchedule(k, std::sqrt(2.0 * std::log(1.0 / tau_prime)) * eta,
                             eta * std::expm1(eta), tau_prime / eta, nu / eta);
  s.final_params = Finalize(s.per_step.back());
  return s;
}

ApproxComposition ApproxAdaptiveCompose(double eta, double tau, double nu,
                                        int k, double tau_prime) {
  RequireK(k);
  if (!(eta > 0.0 && eta <= 1.5)) {
    throw ArgumentError(kModule, "approximate composition requires 0 < eta <= 3/2");
  }
  if (!(tau > 0.0)) {
    throw ArgumentError(kModule, "approximate composition requires tau > 0");
  }
  if (!(tau <= eta / 50.0)) {
    throw ArgumentError(kModule, "approximate composition requires tau <= eta/50 (got tau = " +
                                     FormatDouble(tau) + ", eta/50 = " +
                                     FormatDouble(eta / 50.0) + ")");
  }
  if (!(nu > 0.0 && nu < 1.0)) {
    throw ArgumentError(kModule, "approximate composition requires 0 < nu < 1");
  }
  RequireOpenUnit(tau_prime, "tau'");

  ApproxComposition out;
  out.constants = ComputeApproxConstants(eta, tau);
  const double tau_hat = out.constants.tau_hat;
  const double drift =
      2.0 * eta * (std::exp(2.0 * eta) / (1.0 - tau_hat) - 1.0) +
      out.constants.psi_tau;
  CompositionSchedule& s = out.schedule;
  s.regime = CompositionRegime::kApproximate;
  s.k = k;
  s.tau_prime = tau_prime;
  s.beyond_stated_range = k < 2;
  s.per_step = BuildSchedule(
      k, 2.0 * std::sqrt(2.0 * std::log(1.0 / tau_prime)) * eta, drift,
      (tau_hat + tau_prime) / (2.0 * eta), nu / (2.0 * eta));
  s.final_params = Finalize(s.per_step.back());
  return out;
}

NoiseAlgorithm::NoiseAlgorithm(QuerySpec query, CalibratedNoiseMechanism mech,
                               double nu)
    : query_(std::move(query)), mech_(mech), nu_(nu) {
  if (!(nu >= 0.0 && nu < 1.0)) throw ArgumentError(kModule, "nu must lie in [0, 1)");
}

StabilityParams NoiseAlgorithm::declared() const {
  return StabilityParams(mech_.eta(), mech_.tau(), nu_);
}

std::string NoiseAlgorithm::Describe() const {
  return std::string(NoiseKindName(mech_.kind())) + "(" + query_.id() + ")";
}

MechanismOutput NoiseAlgorithm::Run(const Dataset& x, uint64_t seed) const {
  return ApplyMechanism(mech_, query_, x, seed);
}

DiscreteAlgorithm::DiscreteAlgorithm(DiscreteInstance instance,
                                     StabilityParams declared, std::string id)
    : instance_(std::move(instance)), declared_(declared), id_(std::move(id)) {}

MechanismOutput DiscreteAlgorithm::Run(const Dataset& x, uint64_t seed) const {
  Rng rng(seed);
  const size_t z = rng.Categorical(instance_.row(instance_.AtomIndex(x)));
  // No underlying real-valued query.
  return MechanismOutput{static_cast<double>(z), id_, seed,
                         std::numeric_limits<double>::quiet_NaN()};
}

ConstantAlgorithm::ConstantAlgorithm(double value, StabilityParams declared)
    : value_(value), declared_(declared) {}

std::string ConstantAlgorithm::Describe() const {
  return "constant(" + FormatDouble(value_) + ")";
}

MechanismOutput ConstantAlgorithm::Run(const Dataset&, uint64_t seed) const {
  return MechanismOutput{value_, Describe(), seed, value_};
}

FixedSequenceAdversary::FixedSequenceAdversary(
    std::vector<std::shared_ptr<const StableAlgorithm>> algorithms)
    : algorithms_(std::move(algorithms)) {
  if (algorithms_.empty()) {
    throw ArgumentError(kModule, "fixed sequence adversary needs an algorithm");
  }
}

AdversaryChoice FixedSequenceAdversary::Choose(
    std::span<const double> previous_outputs) {
  const size_t i = previous_outputs.size() % algorithms_.size();
  return AdversaryChoice{algorithms_[i], "fixed[" + std::to_string(i) + "]"};
}

std::vector<double> Transcript::outputs() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.output.w);
  return out;
}

Transcript RunComposition(const Dataset& x, CompositionAdversary& adversary,
                          int k, const StabilityParams& base_params,
                          uint64_t seed) {
  RequireK(k);
  Transcript transcript;
  std::vector<double> released;
  released.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    AdversaryChoice choice = adversary.Choose(released);
    if (!choice.algorithm) {
      throw ContractViolation(kModule, "adversary chose no algorithm at step " +
                                           std::to_string(i + 1));
    }
    const StableAlgorithm& algo = *choice.algorithm;
    const StabilityParams d = algo.declared();
    if (d.eta() > base_params.eta() + kSlack ||
        d.tau() > base_params.tau() + kSlack ||
        d.nu() > base_params.nu() + kSlack) {
      throw ContractViolation(kModule, algo.Describe() +
                                           " declares weaker parameters than "
                                           "the composition allows");
    }
    if (const DiscreteInstance* inst = algo.discrete_instance()) {
      const double violation = EstimateTypicalityViolation(
          *inst, base_params.eta(), base_params.tau());
      if (violation > base_params.nu() + kSlack) {
        throw ContractViolation(
            kModule, algo.Describe() + " has typicality violation mass " +
                         FormatDouble(violation) + " above nu = " +
                         FormatDouble(base_params.nu()));
      }
    }
    MechanismOutput out = algo.Run(x, DeriveSeed(seed, static_cast<uint64_t>(i)));
    released.push_back(out.w);
    transcript.adversary_log.push_back(std::move(choice.note));
    transcript.entries.push_back(TranscriptEntry{i + 1, algo.Describe(), std::move(out)});
  }
  return transcript;
}

}  // namespace typstab
