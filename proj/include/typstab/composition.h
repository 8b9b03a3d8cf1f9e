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

// Parameter accounting for composing typically stable algorithms, and the
// k-fold adaptive composition driver.
//
// Pure adaptive composition of k (eta, 0, nu) algorithms uses the per-step
// schedule
//   eta_j = sqrt(2 j ln(1/tau')) eta + j eta (e^eta - 1)
//   tau_j = nu_j = (j tau'/eta + nu/eta + sum_{t<j} e^{eta_t} nu/eta)^{1/2}
// and reports (eta*, tau*, nu*) = (3 eta_k, 5 tau_k, 5 tau_k). The
// approximate case (tau > 0) replaces these with
//   tau_hat = 2 tau / (1 - e^{-eta})
//   eta_j = 2 sqrt(2 j ln(1/tau')) eta
//           + j (2 eta (e^{2 eta} / (1 - tau_hat) - 1) + psi(tau))
//   tau_j = (j (tau_hat + tau') / (2 eta) + nu / (2 eta)
//            + sum_{t<j} e^{eta_t} nu / (2 eta))^{1/2}
// with the same final scaling. All logarithms are natural.

#ifndef TYPSTAB_COMPOSITION_H_
#define TYPSTAB_COMPOSITION_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "typstab/core_model.h"
#include "typstab/mechanisms.h"

namespace typstab {

// (k eta, k tau, k nu). Throws ArgumentError for k < 1 or k nu >= 1.
StabilityParams NonAdaptiveCompose(const StabilityParams& p, int k);

struct StepParams {
  double eta = 0.0;
  double tau = 0.0;
  double nu = 0.0;
};

struct ComposedParams {
  double eta = 0.0;
  double tau = 0.0;
  double nu = 0.0;
  // tau >= 1 or nu >= 1: well defined but says nothing.
  bool vacuous = false;
};

enum class CompositionRegime { kPure, kApproximate };

struct CompositionSchedule {
  CompositionRegime regime = CompositionRegime::kPure;
  int k = 0;
  double tau_prime = 0.0;
  // Entry j-1 holds (eta_j, tau_j, nu_j).
  std::vector<StepParams> per_step;
  ComposedParams final_params;
  // Set for k = 1, which the guarantee does not cover; the schedule is still
  // the j = 1 entry of the formulas.
  bool beyond_stated_range = false;
};

struct ApproxCompositionConstants {
  double tau_hat = 0.0;
  double psi_tau = 0.0;
};

// Throws ArgumentError unless eta > 0 and tau >= 0.
ApproxCompositionConstants ComputeApproxConstants(double eta, double tau);

// Throws ArgumentError unless k >= 1, eta > 0, nu in [0, 1), tau' in (0, 1).
CompositionSchedule PureAdaptiveCompose(double eta, double nu, int k,
                                        double tau_prime);

struct ApproxComposition {
  CompositionSchedule schedule;
  ApproxCompositionConstants constants;
};

// Enforces eta in (0, 1.5], tau in (0, eta/50], nu in (0, 1), tau' in (0, 1)
// and k >= 1. The ArgumentError message names the violated bound.
ApproxComposition ApproxAdaptiveCompose(double eta, double tau, double nu,
                                        int k, double tau_prime);

// An algorithm an adversary may pick at one step of the composition.
class StableAlgorithm {
 public:
  virtual ~StableAlgorithm() = default;

  // The (eta, tau, nu) it claims.
  virtual StabilityParams declared() const = 0;
  virtual std::string Describe() const = 0;
  virtual MechanismOutput Run(const Dataset& x, uint64_t seed) const = 0;
  // The exact table when the claim can be checked by enumeration.
  virtual const DiscreteInstance* discrete_instance() const { return nullptr; }
};

// A calibrated noise mechanism answering one query.
class NoiseAlgorithm : public StableAlgorithm {
 public:
  NoiseAlgorithm(QuerySpec query, CalibratedNoiseMechanism mech, double nu);

  StabilityParams declared() const override;
  std::string Describe() const override;
  MechanismOutput Run(const Dataset& x, uint64_t seed) const override;

 private:
  QuerySpec query_;
  CalibratedNoiseMechanism mech_;
  double nu_;
};

// Samples the output index from the row of the input's atom. The output value
// w is the index.
class DiscreteAlgorithm : public StableAlgorithm {
 public:
  DiscreteAlgorithm(DiscreteInstance instance, StabilityParams declared,
                    std::string id);

  StabilityParams declared() const override { return declared_; }
  std::string Describe() const override { return id_; }
  MechanismOutput Run(const Dataset& x, uint64_t seed) const override;
  const DiscreteInstance* discrete_instance() const override {
    return &instance_;
  }

 private:
  DiscreteInstance instance_;
  StabilityParams declared_;
  std::string id_;
};

// Ignores its input.
class ConstantAlgorithm : public StableAlgorithm {
 public:
  ConstantAlgorithm(double value, StabilityParams declared);

  StabilityParams declared() const override { return declared_; }
  std::string Describe() const override;
  MechanismOutput Run(const Dataset& x, uint64_t seed) const override;

 private:
  double value_;
  StabilityParams declared_;
};

struct AdversaryChoice {
  std::shared_ptr<const StableAlgorithm> algorithm;
  // Free-form record of why; copied into the transcript's adversary log.
  std::string note;
};

// Picks the next algorithm from the outputs released so far. The interface
// carries no dataset.
class CompositionAdversary {
 public:
  virtual ~CompositionAdversary() = default;
  virtual AdversaryChoice Choose(std::span<const double> previous_outputs) = 0;
};

// Plays a fixed list in order, cycling if k exceeds its length.
class FixedSequenceAdversary : public CompositionAdversary {
 public:
  explicit FixedSequenceAdversary(
      std::vector<std::shared_ptr<const StableAlgorithm>> algorithms);
  AdversaryChoice Choose(std::span<const double> previous_outputs) override;

 private:
  std::vector<std::shared_ptr<const StableAlgorithm>> algorithms_;
};

class CallbackAdversary : public CompositionAdversary {
 public:
  using Callback = std::function<AdversaryChoice(std::span<const double>)>;
  explicit CallbackAdversary(Callback callback)
      : callback_(std::move(callback)) {}
  AdversaryChoice Choose(std::span<const double> previous_outputs) override {
    return callback_(previous_outputs);
  }

 private:
  Callback callback_;
};

struct TranscriptEntry {
  int step = 0;
  std::string descriptor;
  MechanismOutput output;
};

struct Transcript {
  std::vector<TranscriptEntry> entries;
  std::vector<std::string> adversary_log;

  std::vector<double> outputs() const;
};

// k rounds on the same x. Step i runs with seed DeriveSeed(seed, i). Throws
// ContractViolation when a chosen algorithm declares weaker parameters than
// base_params, or when its discrete table has typicality violation mass above
// base_params.nu() at (eta, tau).
Transcript RunComposition(const Dataset& x, CompositionAdversary& adversary,
                          int k, const StabilityParams& base_params,
                          uint64_t seed);

}  // namespace typstab

#endif  // TYPSTAB_COMPOSITION_H_
