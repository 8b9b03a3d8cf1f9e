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

// Command line front end:
//
//   typstab <calibrate|mech-tail|compose|verify|adaptive>
//       [--config PATH] [--seed U64] [--threads N] [--out DIR]
//
// Exit status: 0 on success, 1 when a check inside the experiment fails or a
// module reports an error, 2 for bad arguments or config.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "typstab/errors.h"
#include "typstab/experiments.h"

namespace {

struct CommandOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir;
};

int Run(typstab::ExperimentKind kind, const CommandOptions& opts) {
  typstab::ExperimentConfig config;
  try {
    config = opts.config_path.empty()
                 ? typstab::DefaultConfig(kind)
                 : typstab::ParseConfigFile(opts.config_path, kind);
    if (opts.threads) config.threads = *opts.threads;
    typstab::ValidateConfig(config);
  } catch (const typstab::Error& e) {
    std::cerr << "typstab: " << e.what() << '\n';
    return 2;
  }
  try {
    const uint64_t seed = typstab::ResolveSeed(opts.seed, config);
    const std::string out = opts.out_dir.empty()
                                ? "typstab-" + std::string(typstab::CommandName(kind))
                                : opts.out_dir;
    const typstab::ExperimentOutcome outcome =
        typstab::RunExperiment(config, seed, out, std::cout);
    std::cout << "seed " << outcome.seed << "; wrote";
    for (const auto& a : outcome.artifacts) std::cout << ' ' << a;
    std::cout << " manifest.json to " << out << '\n';
    return outcome.success ? 0 : 1;
  } catch (const typstab::ConfigError& e) {
    std::cerr << "typstab: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "typstab: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Typical-stability mechanisms, composition accounting and "
               "verification experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("typstab ") + TYPSTAB_VERSION);

  struct Entry {
    typstab::ExperimentKind kind;
    const char* description;
  };
  const std::vector<Entry> entries = {
      {typstab::ExperimentKind::kCalibrate,
       "Invert a concentration function and report the noise scales"},
      {typstab::ExperimentKind::kMechanismTail,
       "Check the error-bound tail of a calibrated mechanism"},
      {typstab::ExperimentKind::kCompose,
       "Compute composed stability parameters and per-step schedules"},
      {typstab::ExperimentKind::kVerifyDiscrete,
       "Exact checks on the discrete reference mechanism and the loss ledger"},
      {typstab::ExperimentKind::kAdaptiveSession,
       "Simulate adaptive analyst sessions"},
  };

  std::vector<CommandOptions> options(entries.size());
  std::vector<CLI::App*> commands;
  for (size_t i = 0; i < entries.size(); ++i) {
    const std::string name(typstab::CommandName(entries[i].kind));
    CLI::App* cmd = app.add_subcommand(name, entries[i].description);
    CommandOptions& o = options[i];
    cmd->add_option("--config", o.config_path, "YAML config or a result manifest")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed,
                    "Seed (overrides TYPSTAB_SEED and the config)");
    cmd->add_option("--threads", o.threads, "Worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out_dir, "Output directory (default typstab-" +
                                            name + ")");
    cmd->footer(typstab::HelpText(entries[i].kind));
    commands.push_back(cmd);
  }

  CLI11_PARSE(app, argc, argv);

  for (size_t i = 0; i < entries.size(); ++i) {
    if (commands[i]->parsed()) return Run(entries[i].kind, options[i]);
  }
  return 2;
}
