// Copyright 2026 The wseg Authors. All Rights Reserved.
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

// wseg <gen-data|train|eval|predict|params|bench> [--config FILE] [--key value ...]
//
// Every configuration key is accepted as --key. Values from --config are
// applied first, command-line values override them.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "wseg/commands.hpp"
#include "wseg/config.hpp"
#include "wseg/error.hpp"

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d{
      {"gen-data", "write a synthetic dataset"},
      {"train", "train a network and write history.csv and per-epoch checkpoints"},
      {"eval", "score a checkpoint on a split and write metrics.csv"},
      {"predict", "write mask.ppm and overlay.ppm for one image"},
      {"params", "print ASPP/WASP parameter accounting"},
      {"bench", "time ASPP and WASP training steps"},
  };
  return d;
}

int report(const std::string& kind, const std::string& message) {
  std::cerr << "error kind=" << kind << " message=" << one_line(message) << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale semantic segmentation with ASPP/WASP necks and height-driven attention"};
  app.require_subcommand(1, 1);

  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (std::string_view name : wseg::command_names()) {
    CLI::App* sub = app.add_subcommand(std::string(name), descriptions().at(std::string(name)));
    sub->add_option("--config", config_file, "key=value configuration file");
    for (const wseg::ConfigKey& k : wseg::config_keys()) {
      std::string help = k.help;
      if (!k.default_value.empty()) help += " [default " + k.default_value + "]";
      CLI::Option* opt = sub->add_option("--" + k.key, values[k.key], help);
      options.emplace(std::string(name) + "/" + k.key, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what());
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  try {
    wseg::RunConfig rc;
    if (!config_file.empty()) rc.load_file(config_file);
    for (const wseg::ConfigKey& k : wseg::config_keys()) {
      if (options.at(command + "/" + k.key)->count() > 0) rc.set(k.key, values[k.key]);
    }
    return wseg::run_command(command, rc, std::cout, std::cerr);
  } catch (const wseg::Error& e) {
    return report(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report("internal", e.what());
  }
}
