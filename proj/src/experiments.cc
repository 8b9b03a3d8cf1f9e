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

#include "typstab/experiments.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "typstab/composition.h"
#include "typstab/concentration.h"
#include "typstab/core_model.h"
#include "typstab/errors.h"
#include "typstab/harness.h"
#include "typstab/mechanisms.h"
#include "typstab/random.h"
#include "typstab/stats.h"
#include "typstab/verifier.h"

#ifndef TYPSTAB_VERSION
#define TYPSTAB_VERSION "unknown"
#endif

namespace typstab {
namespace {

constexpr char kModule[] = "experiments";

struct ParamSpec {
  const char* key;
  ParamValue fallback;
  const char* help;
};

struct KindSpec {
  ExperimentKind kind;
  const char* command;
  const char* manifest_name;
  std::vector<ParamSpec> params;
  const char* columns;
};

const std::vector<KindSpec>& Kinds() {
  static const std::vector<KindSpec> kinds = {
      {ExperimentKind::kCalibrate,
       "calibrate",
       "calibrate",
       {
           {"form", std::string("subgaussian"),
            "mcdiarmid | subgaussian | subexponential"},
           {"sigma", 1.0, "subgaussian / subexponential sigma"},
           {"b", 1.0, "subexponential b"},
           {"variant", std::string("as_stated"),
            "subexponential form: as_stated | bernstein"},
           {"delta", 1.0, "McDiarmid sensitivity"},
           {"n", int64_t{100}, "dataset size for McDiarmid"},
           {"nu", 0.01, "typicality mass nu in (0, 1)"},
           {"log_inv_nu", 0.0,
            "ln(1/nu); overrides nu when positive (both given must agree)"},
           {"eta", 0.1, "eta for the noise scales"},
           {"tau", 0.01, "tau for the Gaussian scale"},
       },
       "calibrate.csv: form,log_inv_nu,alpha,gamma_at_alpha,eta,laplace_scale,"
       "tau,gaussian_sigma"},
      {ExperimentKind::kMechanismTail,
       "mech-tail",
       "mechanism_tail",
       {
           {"mechanism", std::string("laplace"), "laplace | gaussian"},
           {"alpha", 1.0, "calibrated half-width"},
           {"eta", 0.5, "eta"},
           {"tau", 0.01, "tau (gaussian)"},
           {"betas", std::vector<double>{0.5, 0.1, 0.05, 0.01},
            "failure probabilities"},
           {"trials", int64_t{100000}, "Monte Carlo draws per beta"},
       },
       "mech_tail.csv: mechanism,alpha,eta,tau,beta,error_bound,analytic_tail,"
       "trials,exceedances,frequency,sigma,pass"},
      {ExperimentKind::kCompose,
       "compose",
       "compose",
       {
           {"regime", std::string("pure"), "pure | approx | non_adaptive"},
           {"eta", 0.1, "per-step eta"},
           {"tau", 0.0, "per-step tau (approx, non_adaptive)"},
           {"nu", 1e-6, "per-step nu"},
           {"k", int64_t{4}, "number of steps"},
           {"tau_prime", 0.01, "tau' in (0, 1)"},
       },
       "compose.csv: regime,k,eta,tau,nu,tau_prime,tau_hat,psi_tau,eta_star,"
       "tau_star,nu_star,vacuous,beyond_stated_range\n"
       "  schedule.csv (adaptive regimes): step,eta_j,tau_j,nu_j"},
      {ExperimentKind::kVerifyDiscrete,
       "verify",
       "verify_discrete",
       {
           {"bias", 0.25, "reference instance bias in (0, 0.5)"},
           {"eta", std::log(1.5), "eta for the exact checks"},
           {"tau", 0.0, "tau for the exact checks"},
           {"nu", 0.0, "nu for the near-independence bound, in [0, 0.1)"},
           {"remaps", int64_t{100}, "random output remappings"},
           {"ledger_k", int64_t{10}, "ledger composition length"},
           {"ledger_eta", 0.1, "per-step eta of the ledger instances"},
           {"tau_prime", 0.01, "ledger tau'"},
           {"sessions", int64_t{10000}, "ledger sessions (>= 1000)"},
       },
       "verify.csv: check,statistic,bound,pass"},
      {ExperimentKind::kAdaptiveSession,
       "adaptive",
       "adaptive_session",
       {
           {"n", int64_t{100}, "dataset size (iid Bernoulli)"},
           {"p", 0.5, "Bernoulli parameter"},
           {"k", int64_t{40}, "queries per session"},
           {"analyst", std::string("sign_overfitter"),
            "sign_overfitter | random_nonadaptive"},
           {"mechanism", std::string("laplace"), "laplace | gaussian | noiseless"},
           {"alpha", 47.0, "target worst-true-error accuracy"},
           {"beta", 0.05, "target failure probability"},
           {"tau", 0.01, "tau (gaussian)"},
           {"sessions", int64_t{1000}, "independent sessions"},
       },
       "adaptive_sessions.csv: session,worst_generalization_error,"
       "worst_true_error,final_generalization_error,final_true_error,violations,"
       "flagged\n"
       "  adaptive_summary.csv: analyst,mechanism,n,k,sessions,eta,nu,tau,"
       "per_query_alpha,alpha,stability_bound,violation_rate,stability_pass,"
       "mean_worst_generalization_error,mean_worst_true_error,worst_true_rate,"
       "failure_shape"},
  };
  return kinds;
}

const KindSpec& SpecFor(ExperimentKind kind) {
  for (const auto& k : Kinds()) {
    if (k.kind == kind) return k;
  }
  throw ArgumentError(kModule, "unknown experiment kind");
}

const ParamValue& Lookup(const ExperimentConfig& config, std::string_view key) {
  for (const auto& [name, value] : config.params) {
    if (name == key) return value;
  }
  throw ArgumentError(kModule, "no parameter named " + std::string(key));
}

// Shortest round-trip form, for help text.
std::string Shortest(double d) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, r.ptr);
}

std::string ToText(const ParamValue& v) {
  struct {
    std::string operator()(double d) const { return Shortest(d); }
    std::string operator()(int64_t i) const { return std::to_string(i); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const std::vector<double>& list) const {
      std::string out = "[";
      for (size_t i = 0; i < list.size(); ++i) {
        if (i) out += ", ";
        out += Shortest(list[i]);
      }
      return out + "]";
    }
  } visitor;
  return std::visit(visitor, v);
}

ParamValue Convert(const YAML::Node& node, const ParamValue& like,
                   const std::string& key) {
  try {
    if (std::holds_alternative<double>(like)) return node.as<double>();
    if (std::holds_alternative<int64_t>(like)) return node.as<int64_t>();
    if (std::holds_alternative<std::string>(like)) return node.as<std::string>();
    if (!node.IsSequence()) throw YAML::Exception(node.Mark(), "not a list");
    return node.as<std::vector<double>>();
  } catch (const YAML::Exception&) {
    const char* want = std::holds_alternative<double>(like)    ? "a number"
                       : std::holds_alternative<int64_t>(like) ? "an integer"
                       : std::holds_alternative<std::string>(like)
                           ? "a string"
                           : "a list of numbers";
    throw ConfigError(kModule, "key '" + key + "' must be " + want);
  }
}

[[noreturn]] void Reject(const std::string& message) {
  throw ConfigError(kModule, message);
}

void RequireOneOf(const ExperimentConfig& c, const char* key,
                  std::initializer_list<const char*> choices) {
  const std::string& v = c.Text(key);
  std::string list;
  for (const char* choice : choices) {
    if (v == choice) return;
    list += list.empty() ? "" : " | ";
    list += choice;
  }
  Reject(std::string(key) + " must be one of " + list + " (got '" + v + "')");
}

void RequireRange(bool ok, const std::string& message) {
  if (!ok) Reject(message);
}

ConcentrationFunction CalibrationFunction(const ExperimentConfig& c) {
  const std::string& form = c.Text("form");
  if (form == "mcdiarmid") {
    return ConcentrationFunction::McDiarmid(c.Real("delta"),
                                            static_cast<size_t>(c.Integer("n")));
  }
  if (form == "subgaussian") return ConcentrationFunction::Subgaussian(c.Real("sigma"));
  return ConcentrationFunction::Subexponential(
      c.Real("sigma"), c.Real("b"),
      c.Text("variant") == "bernstein" ? SubexponentialVariant::kStandardBernstein
                                       : SubexponentialVariant::kAsStated);
}

double CalibrationLevel(const ExperimentConfig& c) {
  const double level = c.Real("log_inv_nu");
  return level > 0.0 ? level : -std::log(c.Real("nu"));
}

size_t KeptCoordinates(int64_t n) { return static_cast<size_t>((n + 1) / 2); }

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw Error(kModule, "cannot write " + path.string());
    out_ << header << '\n';
  }
  CsvWriter& operator<<(double v) { return Cell(FormatDouble(v)); }
  CsvWriter& operator<<(int64_t v) { return Cell(std::to_string(v)); }
  CsvWriter& operator<<(int v) { return Cell(std::to_string(v)); }
  CsvWriter& operator<<(size_t v) { return Cell(std::to_string(v)); }
  CsvWriter& operator<<(bool v) { return Cell(v ? "true" : "false"); }
  CsvWriter& operator<<(const std::string& v) { return Cell(v); }
  CsvWriter& operator<<(const char* v) { return Cell(v); }
  void EndRow() {
    out_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& Cell(const std::string& text) {
    if (!first_) out_ << ',';
    out_ << text;
    first_ = false;
    return *this;
  }

  std::ofstream out_;
  bool first_ = true;
};

std::string Short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct RunContext {
  const ExperimentConfig& config;
  uint64_t seed;
  const std::filesystem::path& out_dir;
  std::ostream& log;
  ExperimentOutcome& outcome;

  std::filesystem::path Artifact(const std::string& name) {
    outcome.artifacts.push_back(name);
    return out_dir / name;
  }
};

void RunCalibrate(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const ConcentrationFunction f = CalibrationFunction(c);
  const double level = CalibrationLevel(c);
  const double alpha = f.AlphaForLevel(level);
  const double eta = c.Real("eta");
  const double tau = c.Real("tau");
  const auto laplace = CalibratedNoiseMechanism::Laplace(alpha, eta);
  const auto gaussian = CalibratedNoiseMechanism::Gaussian(alpha, eta, tau);
  CsvWriter csv(ctx.Artifact("calibrate.csv"),
                "form,log_inv_nu,alpha,gamma_at_alpha,eta,laplace_scale,tau,"
                "gaussian_sigma");
  csv << f.Describe() << level << alpha << f.Gamma(alpha) << eta
      << laplace.scale() << tau << gaussian.scale();
  csv.EndRow();
  ctx.log << f.Describe() << ": alpha=" << Short(alpha)
          << " laplace_scale=" << Short(laplace.scale())
          << " gaussian_sigma=" << Short(gaussian.scale()) << '\n';
}

void RunMechanismTail(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const bool laplace = c.Text("mechanism") == "laplace";
  const double alpha = c.Real("alpha");
  const double eta = c.Real("eta");
  const double tau = laplace ? 0.0 : c.Real("tau");
  const auto mech = laplace ? CalibratedNoiseMechanism::Laplace(alpha, eta)
                            : CalibratedNoiseMechanism::Gaussian(alpha, eta, tau);
  const int64_t trials = c.Integer("trials");
  std::vector<double> magnitude(static_cast<size_t>(trials));
  ParallelFor(magnitude.size(), ctx.config.threads, [&](size_t t) {
    magnitude[t] = std::fabs(mech.DrawNoise(DeriveSeed(ctx.seed, t)));
  });

  CsvWriter csv(ctx.Artifact("mech_tail.csv"),
                "mechanism,alpha,eta,tau,beta,error_bound,analytic_tail,trials,"
                "exceedances,frequency,sigma,pass");
  for (size_t i = 0; i < c.Reals("betas").size(); ++i) {
    const double beta = c.Reals("betas")[i];
    const double bound = laplace ? LaplaceErrorBound(alpha, eta, beta)
                                 : GaussianErrorBound(alpha, eta, tau, beta);
    const int64_t exceed = std::count_if(magnitude.begin(), magnitude.end(),
                                         [bound](double m) { return m >= bound; });
    const double freq = static_cast<double>(exceed) / static_cast<double>(trials);
    const double sigma = BinomialSigma(beta, trials);
    // Laplace has the tail exactly at beta; the Gaussian bound only dominates.
    const bool pass = laplace ? std::fabs(freq - beta) <= 3.0 * sigma
                              : freq <= beta + 3.0 * sigma;
    ctx.outcome.success = ctx.outcome.success && pass;
    csv << NoiseKindName(mech.kind()) << alpha << eta << tau << beta << bound
        << mech.TailProbability(bound) << trials << exceed << freq << sigma << pass;
    csv.EndRow();
    ctx.log << "beta=" << Short(beta) << " bound=" << Short(bound)
            << " frequency=" << Short(freq) << (pass ? " PASS" : " FAIL") << '\n';
  }
}

void RunCompose(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const std::string& regime = c.Text("regime");
  const double eta = c.Real("eta");
  const double tau = c.Real("tau");
  const double nu = c.Real("nu");
  const int k = static_cast<int>(c.Integer("k"));
  const double tau_prime = c.Real("tau_prime");

  ComposedParams final_params;
  ApproxCompositionConstants constants;
  std::optional<CompositionSchedule> schedule;
  bool beyond = false;
  if (regime == "non_adaptive") {
    const StabilityParams p = NonAdaptiveCompose(StabilityParams(eta, tau, nu), k);
    final_params = ComposedParams{p.eta(), p.tau(), p.nu(), p.tau() >= 1.0};
  } else if (regime == "pure") {
    schedule = PureAdaptiveCompose(eta, nu, k, tau_prime);
  } else {
    ApproxComposition approx = ApproxAdaptiveCompose(eta, tau, nu, k, tau_prime);
    constants = approx.constants;
    schedule = std::move(approx.schedule);
  }
  if (schedule) {
    final_params = schedule->final_params;
    beyond = schedule->beyond_stated_range;
  }

  CsvWriter csv(ctx.Artifact("compose.csv"),
                "regime,k,eta,tau,nu,tau_prime,tau_hat,psi_tau,eta_star,tau_star,"
                "nu_star,vacuous,beyond_stated_range");
  csv << regime << k << eta << tau << nu << tau_prime << constants.tau_hat
      << constants.psi_tau << final_params.eta << final_params.tau
      << final_params.nu << final_params.vacuous << beyond;
  csv.EndRow();
  if (schedule) {
    CsvWriter steps(ctx.Artifact("schedule.csv"), "step,eta_j,tau_j,nu_j");
    for (size_t j = 0; j < schedule->per_step.size(); ++j) {
      const StepParams& s = schedule->per_step[j];
      steps << j + 1 << s.eta << s.tau << s.nu;
      steps.EndRow();
    }
  }
  ctx.log << regime << " k=" << k << ": eta*=" << Short(final_params.eta)
          << " tau*=" << Short(final_params.tau) << " nu*=" << Short(final_params.nu)
          << (final_params.vacuous ? " (vacuous)" : "")
          << (beyond ? " (k=1 is outside the guarantee)" : "") << '\n';
}

void RunVerify(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const double eta = c.Real("eta");
  const double tau = c.Real("tau");
  const double nu = c.Real("nu");
  const DiscreteInstance instance = DiscreteInstance::WithMarginalOracle(
      {Dataset({0.0}), Dataset({1.0})}, {0.5, 0.5},
      {{0.5, 0.5}, {1.0 - c.Real("bias"), c.Real("bias")}});

  CsvWriter csv(ctx.Artifact("verify.csv"), "check,statistic,bound,pass");
  auto report = [&](const char* name, double statistic, double bound, bool pass) {
    csv << name << statistic << bound << pass;
    csv.EndRow();
    ctx.outcome.success = ctx.outcome.success && pass;
    ctx.log << (pass ? "PASS " : "FAIL ") << name << ": " << Short(statistic)
            << " vs " << Short(bound) << '\n';
  };

  double worst = 0.0;
  bool indistinguishable = true;
  for (size_t x = 0; x < instance.atom_count(); ++x) {
    worst = std::max({worst, HockeyStick(instance.row(x), instance.oracle_row(), eta),
                      HockeyStick(instance.oracle_row(), instance.row(x), eta)});
    indistinguishable = indistinguishable &&
                        CheckIndistinguishable(instance.row(x),
                                               instance.oracle_row(), eta, tau);
  }
  report("indistinguishable", worst, tau, indistinguishable);

  const double violation = EstimateTypicalityViolation(instance, eta, tau);
  report("typicality_violation", violation, nu, violation <= nu + 1e-12);

  const NearIndependenceReport ni = NearIndependenceCheck(instance, eta, tau, nu);
  report("near_independence", ni.slack, ni.bound, ni.pass);
  report("near_independence_conditional", ni.conditional_slack, tau,
         ni.conditional_pass);

  // Random deterministic maps of the outputs onto 1..m labels.
  double worst_increase = 0.0;
  const int64_t remaps = c.Integer("remaps");
  for (int64_t r = 0; r < remaps; ++r) {
    Rng rng(DeriveSeed(DeriveSeed(ctx.seed, 1), static_cast<uint64_t>(r)));
    const size_t outputs = instance.output_count();
    const size_t targets = 1 + rng.NextU64() % outputs;
    std::vector<size_t> map(outputs);
    for (size_t& m : map) m = rng.NextU64() % targets;
    for (size_t x = 0; x < instance.atom_count(); ++x) {
      const auto p = RemapOutputs(instance.row(x), map, targets);
      const auto q = RemapOutputs(instance.oracle_row(), map, targets);
      worst_increase = std::max(
          {worst_increase,
           HockeyStick(p, q, eta) - HockeyStick(instance.row(x), instance.oracle_row(), eta),
           HockeyStick(q, p, eta) - HockeyStick(instance.oracle_row(), instance.row(x), eta)});
    }
  }
  report("post_processing", worst_increase, 0.0, worst_increase <= 1e-12);

  const double ledger_eta = c.Real("ledger_eta");
  const DiscreteInstance forward =
      DiscreteReferenceMechanism(ReferenceBiasForEta(ledger_eta), ledger_eta);
  const DiscreteInstance mirrored = forward.PostProcess({{0.0, 1.0}, {1.0, 0.0}});
  const std::vector<DiscreteInstance> menu = {forward, mirrored};
  const CompositionSchedule schedule = PureAdaptiveCompose(
      ledger_eta, 0.0, static_cast<int>(c.Integer("ledger_k")), c.Real("tau_prime"));
  LedgerOptions options;
  options.eta = ledger_eta;
  options.nu = 0.0;
  options.sessions = c.Integer("sessions");
  options.seed = DeriveSeed(ctx.seed, 2);
  options.threads = c.threads;
  // Follows the last output: keep the orientation that produced a 1.
  const LedgerReport ledger = LedgerRun(
      menu,
      [](size_t, std::span<const size_t> previous) -> size_t {
        return previous.empty() || previous.back() == 1 ? 0 : 1;
      },
      schedule, options);
  report("ledger", ledger.frequency, ledger.allowed + 3.0 * ledger.sigma, ledger.pass);
}

void RunAdaptive(RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const int64_t n = c.Integer("n");
  const int64_t k = c.Integer("k");
  const std::string& analyst = c.Text("analyst");
  const std::string& mechanism = c.Text("mechanism");
  const DataDistribution dist(IidBernoulli{c.Real("p")}, static_cast<size_t>(n));
  // The weakest certificate any of the analyst's queries declares.
  const ConcentrationFunction f = ConcentrationFunction::Subgaussian(
      1.0 / std::sqrt(static_cast<double>(KeptCoordinates(n))));
  const AdaptiveAccuracyParameters params = ComputeAdaptiveAccuracyParameters(
      static_cast<int>(k), c.Real("alpha"), c.Real("beta"), f);

  SessionConfig session;
  session.k = static_cast<size_t>(k);
  session.eta = params.eta;
  session.nu = params.nu;
  session.tau = mechanism == "gaussian" ? c.Real("tau") : 0.0;
  session.mechanism = mechanism == "laplace"    ? MechanismKind::kLaplace
                      : mechanism == "gaussian" ? MechanismKind::kGaussian
                                                : MechanismKind::kNoiseless;
  session.f = f;
  const AnalystFactory factory = [&](uint64_t s) -> std::unique_ptr<Analyst> {
    if (analyst == "sign_overfitter") {
      return std::make_unique<SignOverfitter>(static_cast<size_t>(n),
                                              static_cast<size_t>(k), 0.5, 0.5, s);
    }
    return std::make_unique<RandomNonadaptiveAnalyst>(static_cast<size_t>(n), 0.5,
                                                      0.5, s);
  };
  const std::vector<SessionResult> results = RunSessions(
      dist, factory, session, c.Integer("sessions"), ctx.seed, c.threads);
  const double alpha = results.front().alpha;
  const BoundsReport bounds = EvaluateAgainstBounds(
      results, alpha, params.alpha, StabilityParams(params.eta, session.tau, params.nu));

  CsvWriter rows(ctx.Artifact("adaptive_sessions.csv"),
                 "session,worst_generalization_error,worst_true_error,"
                 "final_generalization_error,final_true_error,violations,flagged");
  for (size_t s = 0; s < results.size(); ++s) {
    const SessionResult& r = results[s];
    rows << s << r.worst_generalization_error << r.worst_true_error
         << r.records.back().generalization_error << r.records.back().true_error
         << r.violations << r.flagged;
    rows.EndRow();
  }
  CsvWriter summary(ctx.Artifact("adaptive_summary.csv"),
                    "analyst,mechanism,n,k,sessions,eta,nu,tau,per_query_alpha,"
                    "alpha,stability_bound,violation_rate,stability_pass,"
                    "mean_worst_generalization_error,mean_worst_true_error,"
                    "worst_true_rate,failure_shape");
  summary << analyst << mechanism << n << k << bounds.sessions << params.eta
          << params.nu << session.tau << alpha << params.alpha
          << bounds.stability_bound << bounds.violation_rate << bounds.stability_pass
          << bounds.mean_worst_generalization_error << bounds.mean_worst_true_error
          << bounds.worst_true_rate << params.failure_shape;
  summary.EndRow();
  ctx.log << analyst << " / " << mechanism << ": mean worst generalization error "
          << Short(bounds.mean_worst_generalization_error)
          << ", per-query violation rate " << Short(bounds.violation_rate)
          << " (bound " << Short(bounds.stability_bound) << ")\n";
}

nlohmann::ordered_json ParamJson(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<int64_t>(&v)) return *i;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<std::vector<double>>(v);
}

}  // namespace

std::string_view CommandName(ExperimentKind kind) { return SpecFor(kind).command; }

std::optional<ExperimentKind> ParseExperimentKind(std::string_view name) {
  for (const auto& k : Kinds()) {
    if (name == k.command || name == k.manifest_name) return k.kind;
  }
  return std::nullopt;
}

double ExperimentConfig::Real(std::string_view key) const {
  return std::get<double>(Lookup(*this, key));
}
int64_t ExperimentConfig::Integer(std::string_view key) const {
  return std::get<int64_t>(Lookup(*this, key));
}
const std::string& ExperimentConfig::Text(std::string_view key) const {
  return std::get<std::string>(Lookup(*this, key));
}
const std::vector<double>& ExperimentConfig::Reals(std::string_view key) const {
  return std::get<std::vector<double>>(Lookup(*this, key));
}
bool ExperimentConfig::Has(std::string_view key) const {
  return std::any_of(params.begin(), params.end(),
                     [key](const auto& p) { return p.first == key; });
}

ExperimentConfig DefaultConfig(ExperimentKind kind) {
  ExperimentConfig config;
  config.kind = kind;
  for (const auto& p : SpecFor(kind).params) config.params.emplace_back(p.key, p.fallback);
  return config;
}

ExperimentConfig ParseConfigText(std::string_view text, ExperimentKind kind) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(kModule, std::string("malformed config: ") + e.what());
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError(kModule, "config must be a map of keys");

  std::optional<uint64_t> manifest_seed;
  if (root["config"] && root["config"].IsMap()) {
    if (root["seed"]) manifest_seed = root["seed"].as<uint64_t>();
    root = root["config"];
  }

  ExperimentConfig config = DefaultConfig(kind);
  const KindSpec& spec = SpecFor(kind);
  std::vector<std::string> unknown;
  bool nu_given = false;
  bool level_given = false;
  for (const auto& entry : root) {
    const std::string key = entry.first.as<std::string>();
    const YAML::Node& value = entry.second;
    if (key == "experiment") {
      const auto named = ParseExperimentKind(value.as<std::string>());
      if (!named || *named != kind) {
        throw ConfigError(kModule, "config is for experiment '" +
                                       value.as<std::string>() + "', not '" +
                                       std::string(spec.command) + "'");
      }
      continue;
    }
    if (key == "seed") {
      try {
        config.seed = value.as<uint64_t>();
      } catch (const YAML::Exception&) {
        throw ConfigError(kModule, "seed must be an unsigned 64-bit integer");
      }
      continue;
    }
    if (key == "threads") {
      config.threads = value.as<int>();
      continue;
    }
    auto it = std::find_if(config.params.begin(), config.params.end(),
                           [&](const auto& p) { return p.first == key; });
    if (it == config.params.end()) {
      unknown.push_back(key);
      continue;
    }
    it->second = Convert(value, it->second, key);
    nu_given = nu_given || key == "nu";
    level_given = level_given || key == "log_inv_nu";
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw ConfigError(kModule, "unknown keys for " + std::string(spec.command) +
                                   ": " + list);
  }
  if (!config.seed && manifest_seed) config.seed = manifest_seed;

  if (kind == ExperimentKind::kCalibrate && level_given) {
    const double level = config.Real("log_inv_nu");
    if (nu_given && level > 0.0 &&
        std::fabs(-std::log(config.Real("nu")) - level) > 1e-9 * level) {
      throw ConfigError(kModule, "nu and log_inv_nu disagree");
    }
    if (level > 0.0) {
      for (auto& [key, value] : config.params) {
        if (key == "nu") value = std::exp(-level);
      }
    }
  }
  ValidateConfig(config);
  return config;
}

ExperimentConfig ParseConfigFile(const std::filesystem::path& path,
                                 ExperimentKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(kModule, "cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfigText(buffer.str(), kind);
}

void ValidateConfig(const ExperimentConfig& c) {
  RequireRange(c.threads >= 1, "threads must be >= 1");
  try {
    switch (c.kind) {
      case ExperimentKind::kCalibrate: {
        RequireOneOf(c, "form", {"mcdiarmid", "subgaussian", "subexponential"});
        RequireOneOf(c, "variant", {"as_stated", "bernstein"});
        RequireRange(c.Real("nu") > 0.0 && c.Real("nu") < 1.0,
                     "nu must lie in (0, 1)");
        RequireRange(c.Real("log_inv_nu") >= 0.0, "log_inv_nu must be >= 0");
        RequireRange(c.Integer("n") >= 1, "n must be >= 1");
        RequireRange(c.Real("eta") > 0.0, "eta must be > 0");
        RequireRange(c.Real("tau") > 0.0 && c.Real("tau") < 1.0,
                     "tau must lie in (0, 1)");
        CalibrationFunction(c).AlphaForLevel(CalibrationLevel(c));
        break;
      }
      case ExperimentKind::kMechanismTail: {
        RequireOneOf(c, "mechanism", {"laplace", "gaussian"});
        RequireRange(c.Real("alpha") > 0.0, "alpha must be > 0");
        RequireRange(c.Real("eta") > 0.0, "eta must be > 0");
        if (c.Text("mechanism") == "gaussian") {
          RequireRange(c.Real("tau") > 0.0 && c.Real("tau") < 1.0,
                       "tau must lie in (0, 1)");
        }
        RequireRange(!c.Reals("betas").empty(), "betas must not be empty");
        for (double beta : c.Reals("betas")) {
          RequireRange(beta > 0.0 && beta < 1.0, "every beta must lie in (0, 1)");
        }
        RequireRange(c.Integer("trials") >= 1000, "trials must be >= 1000");
        break;
      }
      case ExperimentKind::kCompose: {
        RequireOneOf(c, "regime", {"pure", "approx", "non_adaptive"});
        const std::string& regime = c.Text("regime");
        const int64_t k = c.Integer("k");
        RequireRange(k >= 1 && k <= 1'000'000, "k must lie in [1, 10^6]");
        if (regime == "pure") {
          RequireRange(c.Real("tau") == 0.0,
                       "pure composition takes tau = 0; use regime approx");
          PureAdaptiveCompose(c.Real("eta"), c.Real("nu"), static_cast<int>(k),
                              c.Real("tau_prime"));
        } else if (regime == "approx") {
          ApproxAdaptiveCompose(c.Real("eta"), c.Real("tau"), c.Real("nu"),
                                static_cast<int>(k), c.Real("tau_prime"));
        } else {
          NonAdaptiveCompose(StabilityParams(c.Real("eta"), c.Real("tau"), c.Real("nu")),
                             static_cast<int>(k));
        }
        break;
      }
      case ExperimentKind::kVerifyDiscrete: {
        RequireRange(c.Real("bias") > 0.0 && c.Real("bias") < 0.5,
                     "bias must lie in (0, 0.5)");
        RequireRange(c.Real("eta") >= 0.0 && c.Real("eta") < 1.0,
                     "near-independence requires 0 <= eta < 1");
        RequireRange(c.Real("nu") >= 0.0 && c.Real("nu") < 0.1,
                     "near-independence requires 0 <= nu < 1/10");
        RequireRange(c.Real("tau") >= 0.0, "tau must be >= 0");
        RequireRange(c.Integer("remaps") >= 1, "remaps must be >= 1");
        RequireRange(c.Integer("ledger_k") >= 1 && c.Integer("ledger_k") <= 1000,
                     "ledger_k must lie in [1, 1000]");
        RequireRange(c.Real("ledger_eta") > 0.0, "ledger_eta must be > 0");
        RequireRange(c.Real("tau_prime") > 0.0 && c.Real("tau_prime") < 1.0,
                     "tau_prime must lie in (0, 1)");
        RequireRange(c.Integer("sessions") >= 1000, "sessions must be >= 1000");
        break;
      }
      case ExperimentKind::kAdaptiveSession: {
        RequireOneOf(c, "analyst", {"sign_overfitter", "random_nonadaptive"});
        RequireOneOf(c, "mechanism", {"laplace", "gaussian", "noiseless"});
        RequireRange(c.Integer("n") >= 1, "n must be >= 1");
        RequireRange(c.Integer("k") >= 2, "k must be >= 2");
        RequireRange(c.Real("p") >= 0.0 && c.Real("p") <= 1.0, "p must lie in [0, 1]");
        RequireRange(c.Real("alpha") > 0.0, "alpha must be > 0");
        RequireRange(c.Real("beta") > 0.0 && c.Real("beta") < 1.0,
                     "beta must lie in (0, 1)");
        if (c.Text("mechanism") == "gaussian") {
          RequireRange(c.Real("tau") > 0.0 && c.Real("tau") < 1.0,
                       "tau must lie in (0, 1)");
        }
        RequireRange(c.Integer("sessions") >= 1, "sessions must be >= 1");
        const double sigma =
            1.0 / std::sqrt(static_cast<double>(KeptCoordinates(c.Integer("n"))));
        const AdaptiveAccuracyParameters p = ComputeAdaptiveAccuracyParameters(
            static_cast<int>(c.Integer("k")), c.Real("alpha"), c.Real("beta"),
            ConcentrationFunction::Subgaussian(sigma));
        RequireRange(p.nu > 0.0 && p.nu < 1.0,
                     "alpha is too large: exp(-gamma(per-query alpha)) underflows "
                     "to 0, so nu is not in (0, 1)");
        break;
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(kModule, e.what());
  }
}

std::string HelpText(ExperimentKind kind) {
  const KindSpec& spec = SpecFor(kind);
  std::string out = "Config keys (defaults):\n";
  for (const auto& p : spec.params) {
    out += "  " + std::string(p.key) + " = " + ToText(p.fallback) + "  " + p.help +
           "\n";
  }
  out += "  seed, threads, experiment: optional top-level keys\n";
  out += "Outputs:\n  " + std::string(spec.columns) + "\n  manifest.json\n";
  return out;
}

uint64_t ResolveSeed(std::optional<uint64_t> flag_seed,
                     const ExperimentConfig& config) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("TYPSTAB_SEED"); env != nullptr && *env) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || end == env || *end != '\0' || *env == '-') {
      throw ConfigError(kModule, "TYPSTAB_SEED must be an unsigned 64-bit integer");
    }
    return v;
  }
  if (config.seed) return *config.seed;
  std::random_device device;
  return (static_cast<uint64_t>(device()) << 32) ^ device();
}

ExperimentOutcome RunExperiment(const ExperimentConfig& config, uint64_t seed,
                                const std::filesystem::path& out_dir,
                                std::ostream& log) {
  ValidateConfig(config);
  std::filesystem::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome outcome;
  outcome.seed = seed;
  RunContext ctx{config, seed, out_dir, log, outcome};
  switch (config.kind) {
    case ExperimentKind::kCalibrate:
      RunCalibrate(ctx);
      break;
    case ExperimentKind::kMechanismTail:
      RunMechanismTail(ctx);
      break;
    case ExperimentKind::kCompose:
      RunCompose(ctx);
      break;
    case ExperimentKind::kVerifyDiscrete:
      RunVerify(ctx);
      break;
    case ExperimentKind::kAdaptiveSession:
      RunAdaptive(ctx);
      break;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const KindSpec& spec = SpecFor(config.kind);
  nlohmann::ordered_json echo;
  echo["experiment"] = spec.manifest_name;
  echo["seed"] = seed;
  echo["threads"] = config.threads;
  for (const auto& [key, value] : config.params) echo[key] = ParamJson(value);
  nlohmann::ordered_json manifest;
  manifest["tool"] = "typstab";
  manifest["version"] = TYPSTAB_VERSION;
  manifest["command"] = spec.command;
  manifest["seed"] = seed;
  manifest["config"] = echo;
  manifest["wall_time_seconds"] = seconds;
  manifest["success"] = outcome.success;
  manifest["artifacts"] = outcome.artifacts;
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(kModule, "cannot write manifest.json");
  out << manifest.dump(2) << '\n';
  return outcome;
}

}  // namespace typstab
