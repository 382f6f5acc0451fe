// Copyright 2026 The valuedice-tabular Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: run, compare and export subcommands over a JSON
// experiment config. Exit status 0 on success, 1 on runtime failure, 2 on
// configuration errors.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "valuedice/harness.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::string out;
  std::string seed;
};

bool looks_like_flag(const std::string& token) {
  return token.size() > 2 && token.rfind("--", 0) == 0;
}

// Unrecognized `--field.path value` / `--field.path=value` pairs become JSON overrides.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& token = extras[i];
    if (!looks_like_flag(token))
      throw valuedice::ConfigError("arguments", "unexpected argument '" + token + "'");
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      valuedice::apply_override(j, token.substr(0, eq), token.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size() || looks_like_flag(extras[i + 1]))
      throw valuedice::ConfigError(token.substr(2), "missing value");
    valuedice::apply_override(j, token, extras[i + 1]);
    ++i;
  }
}

void print_report(const valuedice::ExperimentReport& report, const std::string& csv) {
  for (const auto& a : report.algorithms) {
    std::cout << valuedice::to_string(a.algorithm) << ": final KL mean "
              << valuedice::format_double(a.final_kl_mean) << " stddev "
              << valuedice::format_double(a.final_kl_stddev) << " over " << a.seeds.size()
              << " seed(s)\n";
  }
  if (report.algorithms.size() > 1) {
    std::cout << "ranking:";
    for (auto a : report.ranking) std::cout << ' ' << valuedice::to_string(a);
    std::cout << '\n';
  }
  std::cout << "wrote " << csv << " and " << valuedice::summary_path(csv).string() << '\n';
}

int dispatch(const std::string& command, const Options& opts, const std::vector<std::string>& extras) {
  nlohmann::json j = valuedice::read_config_json(opts.config);
  apply_overrides(j, extras);
  if (!opts.seed.empty()) j["seeds"] = valuedice::parse_seed_list(opts.seed);
  if (!opts.out.empty() && command != "export") j["output"] = opts.out;
  const valuedice::ExperimentConfig config = valuedice::parse_config(j);

  if (command == "run") {
    print_report(valuedice::run_experiment(config), config.output);
  } else if (command == "compare") {
    print_report(valuedice::compare_baselines(config), config.output);
  } else {
    std::filesystem::path path = opts.out;
    if (path.empty()) {
      path = config.output;
      path.replace_extension(".kl.csv");
    }
    const auto seed = config.seeds.front();
    const auto result = valuedice::export_experiment_curve(config, seed, path);
    std::cout << valuedice::to_string(config.algorithm) << " seed " << seed << ": final KL "
              << valuedice::format_double(result.final_kl()) << "\nwrote " << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular ValueDICE imitation experiments"};
  app.require_subcommand(1);

  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"run", "Train the configured algorithm on every seed"},
      {"compare", "Run ValueDICE, BC and GAIL on identical seeds and rank them"},
      {"export", "Write the update,kl curve of one seed"},
  };
  for (const auto& [name, description] : commands) {
    auto* sub = app.add_subcommand(name, description);
    sub->add_option("--config", opts.config, "Experiment JSON file")->required();
    sub->add_option("--out", opts.out, "Output CSV path (overrides the config's output)");
    sub->add_option("--seed", opts.seed, "Comma-separated seed list, e.g. 0,1,2");
    sub->allow_extras();
    sub->footer("Any config field can be overridden as --section.field-name VALUE, "
                "e.g. --training.batch-size 32 or --mix.alpha 0.5.");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  try {
    return dispatch(sub->get_name(), opts, sub->remaining());
  } catch (const valuedice::ConfigError& e) {
    std::cerr << "config error: " << e.field() << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
