//
// Copyright 2026 The Aniso Authors
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

// Command-line front end: run, validate and version.

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "aniso/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Privacy risk of anisotropic Langevin dynamics"};
  app.require_subcommand(1);

  std::string run_path;
  auto* run = app.add_subcommand("run", "Validate a config and run the experiment");
  run->add_option("config", run_path, "Experiment config (JSON)")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config and list derived quantities");
  validate->add_option("config", validate_path, "Experiment config (JSON)")->required();

  auto* version = app.add_subcommand("version", "Print library versions");

  CLI11_PARSE(app, argc, argv);

  if (version->parsed()) {
    std::cout << aniso::cli::versions().dump(2) << "\n";
    return 0;
  }
  const auto outcome = run->parsed() ? aniso::cli::run_config_file(run_path)
                                     : aniso::cli::validate_config_file(validate_path);
  (outcome.exit_code == 0 ? std::cout : std::cerr) << outcome.report.dump(2) << "\n";
  return outcome.exit_code;
}
