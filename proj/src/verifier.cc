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

#include "typstab/verifier.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "typstab/errors.h"
#include "typstab/random.h"
#include "typstab/stats.h"

namespace typstab {
namespace {

constexpr char kModule[] = "verifier";
constexpr double kSlack = 1e-12;
constexpr int64_t kMinLedgerSessions = 1'000;

}  // namespace

double HockeyStick(std::span<const double> p, std::span<const double> q,
                   double eta) {
  if (p.size() != q.size()) {
    throw ArgumentError(kModule, "distributions have different supports (" +
                                     std::to_string(p.size()) + " vs " +
                                     std::to_string(q.size()) + " outputs)");
  }
  const double scale = std::exp(eta);
  double total = 0.0;
  for (size_t z = 0; z < p.size(); ++z) {
    total += std::max(p[z] - scale * q[z], 0.0);
  }
  return total;
}

bool CheckIndistinguishable(std::span<const double> p,
                            std::span<const double> q, double eta, double tau) {
  return std::max(HockeyStick(p, q, eta), HockeyStick(q, p, eta)) <=
         tau + kSlack;
}

double EstimateTypicalityViolation(const DiscreteInstance& instance, double eta,
                                   double tau) {
  double mass = 0.0;
  for (size_t x = 0; x < instance.atom_count(); ++x) {
    if (!CheckIndistinguishable(instance.row(x), instance.oracle_row(), eta, tau)) {
      mass += instance.atom_probabilities()[x];
    }
  }
  return mass;
}

PairwiseTypicalSet MaxPairwiseTypicalSet(const DiscreteInstance& instance,
                                         double eta, double tau) {
  const size_t m = instance.atom_count();
  std::vector<uint32_t> compatible(m, 0);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < m; ++j) {
      if (CheckIndistinguishable(instance.row(i), instance.row(j), eta, tau)) {
        compatible[i] |= 1u << j;
      }
    }
  }
  const auto probs = instance.atom_probabilities();
  PairwiseTypicalSet best;
  best.mass = -1.0;
  for (uint32_t subset = 1; subset < (1u << m); ++subset) {
    double mass = 0.0;
    bool ok = true;
    for (size_t i = 0; i < m && ok; ++i) {
      if (!(subset >> i & 1u)) continue;
      ok = (subset & ~compatible[i]) == 0;
      mass += probs[i];
    }
    if (ok && mass > best.mass) {
      best.members = subset;
      best.mass = mass;
    }
  }
  best.violation = std::max(0.0, 1.0 - best.mass);
  return best;
}

NearIndependenceReport NearIndependenceCheck(const DiscreteInstance& instance,
                                             double eta, double tau, double nu) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw ArgumentError(kModule, "near-independence requires 0 <= eta < 1");
  }
  if (!(nu >= 0.0 && nu < 0.1)) {
    throw ArgumentError(kModule, "near-independence requires 0 <= nu < 1/10");
  }
  if (!(tau >= 0.0)) throw ArgumentError(kModule, "tau must be >= 0");

  const size_t atoms = instance.atom_count();
  const size_t outputs = instance.output_count();
  const auto probs = instance.atom_probabilities();

  // Output law of A(Y) for Y ~ P, optionally restricted to a set.
  auto marginal = [&](uint32_t members, double mass) {
    std::vector<double> m(outputs, 0.0);
    for (size_t y = 0; y < atoms; ++y) {
      if (!(members >> y & 1u)) continue;
      for (size_t z = 0; z < outputs; ++z) {
        m[z] += probs[y] / mass * instance.row(y)[z];
      }
    }
    return m;
  };
  auto tables = [&](uint32_t members, double mass) {
    const std::vector<double> m = marginal(members, mass);
    std::vector<double> joint(atoms * outputs, 0.0);
    std::vector<double> product(atoms * outputs, 0.0);
    for (size_t x = 0; x < atoms; ++x) {
      if (!(members >> x & 1u)) continue;
      const double px = probs[x] / mass;
      for (size_t z = 0; z < outputs; ++z) {
        joint[x * outputs + z] = px * instance.row(x)[z];
        product[x * outputs + z] = px * m[z];
      }
    }
    return std::pair{joint, product};
  };

  NearIndependenceReport report;
  const uint32_t everyone = (1u << atoms) - 1u;
  const auto [joint, product] = tables(everyone, 1.0);
  for (double v : joint) report.joint_total += v;
  for (double v : product) report.product_total += v;
  report.slack = HockeyStick(joint, product, eta);
  report.bound = tau + 5.0 * nu;
  report.pass = report.slack <= report.bound + kSlack;

  report.typical_set = MaxPairwiseTypicalSet(instance, eta, tau);
  const auto [cjoint, cproduct] =
      tables(report.typical_set.members, report.typical_set.mass);
  report.conditional_slack = HockeyStick(cjoint, cproduct, eta);
  report.conditional_pass = report.conditional_slack <= tau + kSlack;
  return report;
}

std::vector<double> RemapOutputs(std::span<const double> p,
                                 std::span<const size_t> map,
                                 size_t output_count) {
  if (map.size() != p.size()) {
    throw ArgumentError(kModule, "remap table needs one entry per output");
  }
  std::vector<double> out(output_count, 0.0);
  for (size_t z = 0; z < p.size(); ++z) {
    if (map[z] >= output_count) {
      throw ArgumentError(kModule, "remap target out of range");
    }
    out[map[z]] += p[z];
  }
  return out;
}

LossLedger ComputeLedger(std::span<const DiscreteInstance* const> steps,
                         size_t atom, std::span<const size_t> outputs,
                         const CompositionSchedule& schedule) {
  if (steps.size() != outputs.size() ||
      steps.size() > schedule.per_step.size()) {
    throw ArgumentError(kModule, "ledger needs one output per step, at most k");
  }
  LossLedger ledger;
  double running = 0.0;
  for (size_t i = 0; i < steps.size(); ++i) {
    const DiscreteInstance& inst = *steps[i];
    const double f =
        std::log(inst.row(atom)[outputs[i]] / inst.oracle_row()[outputs[i]]);
    running += f;
    ledger.f.push_back(f);
    ledger.cumulative.push_back(running);
    ledger.thresholds.push_back(schedule.per_step[i].eta);
  }
  return ledger;
}

LedgerReport LedgerRun(std::span<const DiscreteInstance> menu,
                       const LedgerChooser& chooser,
                       const CompositionSchedule& schedule,
                       const LedgerOptions& options) {
  if (menu.empty()) throw ArgumentError(kModule, "ledger menu is empty");
  if (options.sessions < kMinLedgerSessions) {
    throw ArgumentError(kModule, "ledger needs at least 1000 sessions");
  }
  const size_t k = schedule.per_step.size();
  if (k == 0) throw ArgumentError(kModule, "schedule has no steps");
  for (const auto& inst : menu) {
    if (inst.atom_count() != menu.front().atom_count()) {
      throw ArgumentError(kModule, "menu entries must share dataset atoms");
    }
    for (size_t x = 0; x < inst.atom_count(); ++x) {
      if (!(inst.atom(x) == menu.front().atom(x)) ||
          inst.atom_probabilities()[x] != menu.front().atom_probabilities()[x]) {
        throw ArgumentError(kModule, "menu entries must share dataset atoms");
      }
    }
  }

  LedgerReport report;
  report.k = static_cast<int>(k);
  report.sessions = options.sessions;
  report.threshold = schedule.per_step.back().eta;
  for (const auto& inst : menu) {
    const double mass = EstimateTypicalityViolation(inst, options.eta, 0.0);
    if (mass > options.nu + kSlack) {
      throw ContractViolation(kModule, "menu entry has typicality violation mass " +
                                           FormatDouble(mass) + " above nu = " +
                                           FormatDouble(options.nu));
    }
    report.typicality_mass = std::max(report.typicality_mass, mass);
  }

  const size_t sessions = static_cast<size_t>(options.sessions);
  std::vector<double> final_loss(sessions);
  // exceeded[s * k + i]: F_{i+1} > eta_{i+1} in session s.
  std::vector<uint8_t> exceeded(sessions * k, 0);
  ParallelFor(sessions, options.threads, [&](size_t s) {
    const uint64_t session_seed = DeriveSeed(options.seed, s);
    Rng atom_rng(DeriveSeed(session_seed, 0));
    const size_t atom = atom_rng.Categorical(menu.front().atom_probabilities());
    std::vector<size_t> outputs;
    outputs.reserve(k);
    double running = 0.0;
    for (size_t i = 0; i < k; ++i) {
      const size_t pick = chooser(i, outputs);
      if (pick >= menu.size()) {
        throw ArgumentError(kModule, "chooser picked a menu index out of range");
      }
      const DiscreteInstance& inst = menu[pick];
      Rng rng(DeriveSeed(session_seed, i + 1));
      const size_t z = rng.Categorical(inst.row(atom));
      running += std::log(inst.row(atom)[z] / inst.oracle_row()[z]);
      exceeded[s * k + i] = running > schedule.per_step[i].eta;
      outputs.push_back(z);
    }
    final_loss[s] = running;
  });

  report.step_frequency.assign(k, 0.0);
  RunningMoments loss;
  for (size_t s = 0; s < sessions; ++s) {
    loss.Add(final_loss[s]);
    report.max_abs_final_loss =
        std::max(report.max_abs_final_loss, std::fabs(final_loss[s]));
    for (size_t i = 0; i < k; ++i) {
      report.step_frequency[i] += exceeded[s * k + i];
    }
    report.exceedances += exceeded[s * k + k - 1];
  }
  for (double& v : report.step_frequency) v /= static_cast<double>(sessions);
  report.mean_final_loss = loss.mean();
  report.frequency =
      static_cast<double>(report.exceedances) / static_cast<double>(sessions);
  report.allowed = schedule.tau_prime +
                   static_cast<double>(k) * report.typicality_mass;
  report.sigma = BinomialSigma(std::min(report.allowed, 1.0), options.sessions);
  report.pass = report.frequency <= report.allowed + 3.0 * report.sigma;
  return report;
}

}  // namespace typstab
