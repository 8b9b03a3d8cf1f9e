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

// Experiment configuration, execution and result files behind the command
// line tool.
//
// A config is a YAML map of parameters for one experiment kind, plus the
// optional top-level keys `experiment`, `seed` and `threads`. A result
// manifest (manifest.json) is accepted as a config too: its `config` and
// `seed` entries are used, so any run can be repeated from its manifest.

#ifndef TYPSTAB_EXPERIMENTS_H_
#define TYPSTAB_EXPERIMENTS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace typstab {

enum class ExperimentKind {
  kCalibrate,
  kMechanismTail,
  kCompose,
  kVerifyDiscrete,
  kAdaptiveSession,
};

// "calibrate", "mech-tail", "compose", "verify", "adaptive".
std::string_view CommandName(ExperimentKind kind);
// Also accepts the snake_case kind names used in manifests.
std::optional<ExperimentKind> ParseExperimentKind(std::string_view name);

using ParamValue = std::variant<double, int64_t, std::string, std::vector<double>>;

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kCalibrate;
  // Every parameter of the kind, defaults filled in, in declaration order.
  std::vector<std::pair<std::string, ParamValue>> params;
  std::optional<uint64_t> seed;
  int threads = 1;

  double Real(std::string_view key) const;
  int64_t Integer(std::string_view key) const;
  const std::string& Text(std::string_view key) const;
  const std::vector<double>& Reals(std::string_view key) const;
  bool Has(std::string_view key) const;
};

// Defaults for a kind.
ExperimentConfig DefaultConfig(ExperimentKind kind);

// Parses YAML (or a manifest) and range-checks every value against the
// owning module. Throws ConfigError listing unknown keys, naming a violated
// precondition, or when the file's `experiment` disagrees with `kind`.
ExperimentConfig ParseConfigText(std::string_view text, ExperimentKind kind);
ExperimentConfig ParseConfigFile(const std::filesystem::path& path,
                                 ExperimentKind kind);

// Range checks on an assembled config. Throws ConfigError.
void ValidateConfig(const ExperimentConfig& config);

// Parameter list with defaults and the CSV columns, for --help.
std::string HelpText(ExperimentKind kind);

// --seed, then TYPSTAB_SEED, then the config, then a fresh entropy draw.
uint64_t ResolveSeed(std::optional<uint64_t> flag_seed,
                     const ExperimentConfig& config);

struct ExperimentOutcome {
  uint64_t seed = 0;
  // Files written, relative to the output directory.
  std::vector<std::string> artifacts;
  // False when a verification check inside the experiment failed.
  bool success = true;
};

// Runs the experiment, writes its CSV tables and manifest.json into out_dir
// (created if missing) and prints a short human-readable summary to `log`.
ExperimentOutcome RunExperiment(const ExperimentConfig& config, uint64_t seed,
                                const std::filesystem::path& out_dir,
                                std::ostream& log);

}  // namespace typstab

#endif  // TYPSTAB_EXPERIMENTS_H_
