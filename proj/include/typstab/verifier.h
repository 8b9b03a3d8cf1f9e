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

// Exact checks of indistinguishability claims on finite tables, and the
// privacy-loss ledger for simulated adaptive composition.
//
// The hockey-stick divergence
//   D_eta(p || q) = sup_O p(O) - e^eta q(O) = sum_z max(p(z) - e^eta q(z), 0)
// is the smallest tau with p(O) <= e^eta q(O) + tau for every event O.

#ifndef TYPSTAB_VERIFIER_H_
#define TYPSTAB_VERIFIER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "typstab/composition.h"
#include "typstab/mechanisms.h"

namespace typstab {

// Throws ArgumentError when p and q have different lengths.
double HockeyStick(std::span<const double> p, std::span<const double> q,
                   double eta);

// Both directions within tau + 1e-12.
bool CheckIndistinguishable(std::span<const double> p,
                            std::span<const double> q, double eta, double tau);

// Mass of dataset atoms whose row is not (eta, tau)-indistinguishable from
// the oracle row.
double EstimateTypicalityViolation(const DiscreteInstance& instance, double eta,
                                   double tau);

struct PairwiseTypicalSet {
  // Bit i set when atom i belongs to the set.
  uint32_t members = 0;
  double mass = 0.0;
  // 1 - mass.
  double violation = 1.0;
};

// The largest-mass set of atoms whose rows are pairwise (eta, tau)-
// indistinguishable, found by enumerating all subsets.
PairwiseTypicalSet MaxPairwiseTypicalSet(const DiscreteInstance& instance,
                                         double eta, double tau);

struct NearIndependenceReport {
  // Sums of the tables P[X = x, A(X) = z] and P[X = x] P[A(Y) = z].
  double joint_total = 0.0;
  double product_total = 0.0;
  // sup_O joint(O) - e^eta product(O).
  double slack = 0.0;
  // tau + 5 nu.
  double bound = 0.0;
  bool pass = false;

  // The same comparison conditioned on X, Y in the pairwise typical set.
  PairwiseTypicalSet typical_set;
  double conditional_slack = 0.0;
  bool conditional_pass = false;
};

// Exact joint-versus-product comparison by enumeration. The product side
// pairs X with the mechanism run on an independent Y ~ P. Throws
// ArgumentError unless eta < 1 and 0 <= nu < 0.1.
NearIndependenceReport NearIndependenceCheck(const DiscreteInstance& instance,
                                             double eta, double tau, double nu);

// Pushes p through the deterministic map z -> map[z] into `output_count`
// outputs.
std::vector<double> RemapOutputs(std::span<const double> p,
                                 std::span<const size_t> map,
                                 size_t output_count);

struct LossLedger {
  // f_i = ln(Pr[A_i(x, z^{i-1}) = z_i] / Pr[W_i = z_i]).
  std::vector<double> f;
  // F_j = f_1 + ... + f_j.
  std::vector<double> cumulative;
  // eta_j from the schedule.
  std::vector<double> thresholds;
};

// Ledger of one realized session: the instance used at each step, the input
// atom and the output drawn at each step.
LossLedger ComputeLedger(std::span<const DiscreteInstance* const> steps,
                         size_t atom, std::span<const size_t> outputs,
                         const CompositionSchedule& schedule);

// Picks the menu index for step `step` (0-based) from the outputs so far.
using LedgerChooser =
    std::function<size_t(size_t step, std::span<const size_t> previous_outputs)>;

struct LedgerOptions {
  // Per-step claim every menu entry must meet.
  double eta = 0.0;
  double nu = 0.0;
  int64_t sessions = 10'000;
  uint64_t seed = 0;
  int threads = 1;
};

struct LedgerReport {
  int k = 0;
  int64_t sessions = 0;
  double threshold = 0.0;
  int64_t exceedances = 0;
  double frequency = 0.0;
  // Largest typicality violation mass among menu entries.
  double typicality_mass = 0.0;
  // tau' + k * typicality_mass.
  double allowed = 0.0;
  double sigma = 0.0;
  bool pass = false;
  double max_abs_final_loss = 0.0;
  double mean_final_loss = 0.0;
  // Frequency of {F_j > eta_j} at each step.
  std::vector<double> step_frequency;
};

// Simulates `sessions` k-fold compositions with k = schedule.k, drawing the
// input atom once per session from the shared atom distribution, and counts
// {F_k > eta_k}. Passes when the frequency is at most allowed + 3 binomial
// standard errors at `allowed`. Throws ContractViolation when a menu entry
// has typicality violation mass above options.nu at (eta, 0), and
// ArgumentError for fewer than 10^3 sessions or menus with different atoms.
LedgerReport LedgerRun(std::span<const DiscreteInstance> menu,
                       const LedgerChooser& chooser,
                       const CompositionSchedule& schedule,
                       const LedgerOptions& options);

}  // namespace typstab

#endif  // TYPSTAB_VERIFIER_H_
