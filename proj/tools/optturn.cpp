/*
 * Copyright 2026 The optturn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// optturn <mode> --config <path> [--output <path>] [--seed <u64>]
//
// Thread count for simulations comes from OPTTURN_THREADS (default: all cores).

#include "optturn/cli_runner.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Optimal turnover experiments: closed forms, Monte Carlo and the variational oracle"};
    std::string mode;
    std::string config_path;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    app.add_option("mode", mode, "steady-state | simulate | oracle-check | paper-example | sweep")
        ->required()
        ->check(CLI::IsMember(optturn::known_modes()));
    app.add_option("--config,-c", config_path, "experiment config (JSON)");
    app.add_option("--output,-o", output, "report path (overrides output.path)");
    app.add_option("--seed", seed, "simulation seed (overrides sim.seed)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : optturn::kExitConfig;
    }

    try {
        optturn::ExperimentConfig config;
        if (config_path.empty()) {
            if (mode != "paper-example") throw optturn::ConfigError("--config is required for mode " + mode);
            config = optturn::parse_config("{}", mode);
        } else {
            config = optturn::load_config(config_path, mode);
        }
        if (output) config.output.path = *output;
        if (seed) config.sim.seed = *seed;

        const optturn::RunResult result = optturn::run(config);
        const optturn::SimEnsemble* ens = result.ensemble ? &*result.ensemble : nullptr;
        const optturn::Table* table = result.table ? &*result.table : nullptr;
        if (!config.output.path.empty()) {
            optturn::write_report(config.output.path, config, result.summary, ens, table,
                                  config.output.format);
        } else if (table) {
            optturn::write_report(std::cout, config, {}, nullptr, table, "csv");
            std::cout << '\n';
        }
        for (const auto& [k, v] : result.summary) std::cout << k << '=' << v << '\n';
        if (mode == "paper-example") {
            auto find = [&](const std::string& key) {
                for (const auto& [k, v] : result.summary) {
                    if (k == key) return v;
                }
                return std::string("n/a");
            };
            std::cout << "paper-example: closed-form turnover " << find("turnover_closed_form")
                      << "/day, MC estimate " << find("turnover_mc") << " +/- "
                      << find("turnover_mc_se") << "/day, oracle max discrepancy "
                      << find("oracle_max_rel_error") << '\n';
        }
        return result.exit_code;
    } catch (const optturn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return optturn::kExitConfig;
    } catch (const optturn::InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return optturn::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return optturn::kExitFailure;
    }
}
