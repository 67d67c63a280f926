// Copyright 2026 The ebd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ebd: scenario runner. Writes CSV tables and manifest.json into the output directory.
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ebd/scenario.hpp"

namespace {

void list_scenarios() {
    for (const auto& s : ebd::scenario::registry()) {
        std::cout << s.name << ": " << s.summary << '\n';
        for (const auto& p : s.params) {
            std::cout << "    " << p.name << " = " << p.fallback << "    # " << p.doc << '\n';
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    namespace sc = ebd::scenario;
    CLI::App app{"Entanglement-by-dissipation scenario runner"};
    std::optional<std::string> scenario;
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> output_dir;
    bool list = false;
    app.add_option("--scenario", scenario, "scenario name (overrides the config file)");
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "override one key: --set key=value (repeatable)");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--output-dir", output_dir, "directory for CSV files and manifest.json");
    app.add_flag("--list", list, "list scenarios and their parameters");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? sc::kExitOk : sc::kExitConfig;
    }
    if (list) {
        list_scenarios();
        return sc::kExitOk;
    }

    try {
        sc::ScenarioConfig cfg = config_path ? sc::load_config(*config_path) : sc::ScenarioConfig{};
        for (const auto& o : overrides) {
            sc::apply_override(cfg, o);
        }
        if (scenario) {
            cfg.scenario = *scenario;
        }
        if (seed) {
            cfg.seed = *seed;
        }
        if (jobs) {
            cfg.jobs = *jobs;
        }
        if (output_dir) {
            cfg.output_dir = *output_dir;
        }
        const auto artifacts = sc::run_scenario(cfg);
        sc::write_artifacts(cfg.output_dir, artifacts);
        for (const auto& a : artifacts) {
            std::cout << cfg.output_dir << '/' << a.file << '\n';
        }
        return sc::kExitOk;
    } catch (const std::exception& e) {
        const int rc = sc::exit_code(e);
        std::cerr << "ebd: " << (rc == sc::kExitConfig ? "config error: " : "numerical failure: ") << e.what()
                  << '\n';
        return rc;
    }
}
