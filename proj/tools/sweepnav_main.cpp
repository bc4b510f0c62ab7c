/*
 * Copyright 2026 The sweepnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sweepnav/common.hpp"
#include "sweepnav/config.hpp"
#include "sweepnav/pipeline.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct FlagSlot {
  std::string key;
  std::vector<std::string> values;  // one per occurrence; last wins
};

}  // namespace

int main(int argc, char** argv) {
  using sweepnav::Config;
  Config cfg = sweepnav::default_config();

  CLI::App app{"sweepnav: inertial navigation and object mapping for sweeping robots"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand and option");

  std::string config_path;
  bool dump_config = false;
  app.add_option("--config", config_path, "JSON config file (flat dotted keys or nested objects)");
  app.add_flag("--dump-config", dump_config, "Print the effective configuration and exit");

  // Every key is a global flag so it may appear before or after the subcommand.
  std::vector<FlagSlot> slots;
  slots.reserve(cfg.entries().size());
  for (const auto& [key, e] : cfg.entries()) {
    slots.push_back({key, {}});
    std::string names = "--" + key;
    for (const auto& a : e.aliases) names += ",--" + a;
    std::string help = e.help + " [" + e.value.dump() + "]";
    app.add_option(names, slots.back().values, help)->take_last()->group("Configuration");
  }

  for (const auto& name : sweepnav::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
  }
  app.get_subcommand("simulate")->description("Generate a simulated sweep recording with scene and captions");
  app.get_subcommand("infer")->description("Estimate the trajectory from IMU data and schedule captures");
  app.get_subcommand("refine")->description("Refine the estimated trajectory with loop closure");
  app.get_subcommand("eval")->description("Score trajectories against ground truth");
  app.get_subcommand("map")->description("Build and score the geo-localized item map");
  app.get_subcommand("plot")->description("Render trajectories to SVG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("sweepnav"));
  spdlog::set_pattern("[%^%l%$] %v");
  try {
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path))
        throw sweepnav::ValidationError("config file not found: " + config_path);
      cfg.merge_file(config_path);
    }
    for (const auto& s : slots)
      if (!s.values.empty()) cfg.set_text(s.key, s.values.back());
    if (dump_config) {
      std::cout << cfg.to_json().dump(2) << "\n";
      return 0;
    }
    sweepnav::run_command(app.get_subcommands().front()->get_name(), cfg);
  } catch (const sweepnav::ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return 0;
}
