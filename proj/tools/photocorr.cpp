// Copyright 2026 The photocorr Authors
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

// photocorr command-line front end: run experiments from JSON configs and
// run the built-in verification suites.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "photocorr/experiments.hpp"
#include "photocorr/verify.hpp"

namespace {

int run(const std::string& config, std::optional<std::uint64_t> seed, unsigned threads,
        const std::optional<std::string>& out_dir) {
    photocorr::RunOptions options;
    options.seed = seed;
    options.threads = threads;
    if (out_dir) options.out_dir = *out_dir;
    const auto outcome = photocorr::run_experiment_file(config, options);
    if (outcome.exit_code != photocorr::kExitOk) {
        std::cerr << "photocorr: " << outcome.error << "\n";
        if (!outcome.files.empty()) std::cerr << "photocorr: details in " << outcome.files.back().string() << "\n";
        return outcome.exit_code;
    }
    for (const auto& f : outcome.files) std::cout << f.string() << "\n";
    return 0;
}

int verify(const std::string& suite, std::optional<std::uint64_t> seed, unsigned threads) {
    photocorr::VerifyOptions options;
    if (seed) options.seed = *seed;
    options.threads = threads;
    bool ok = true;
    bool found = false;
    for (const auto& info : photocorr::verify_suites()) {
        if (suite == "all" ? info.name == "homodyne-reference" : info.name != suite) continue;
        found = true;
        std::cout << "suite " << info.name << " (" << info.summary << ")\n";
        const auto result = photocorr::run_suite(info.name, options);
        photocorr::print_suite(std::cout, result);
        ok = ok && result.passed();
    }
    if (!found) {
        std::cerr << "photocorr: unknown suite '" << suite << "' (see verify --list)\n";
        return photocorr::kExitInvalid;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photocorr: photon-correlation simulation and analysis toolkit"};
    app.set_version_flag("--version", std::string(PHOTOCORR_VERSION));
    app.require_subcommand(1);
    app.footer("Worker threads default to PHOTOCORR_THREADS, else the hardware concurrency.");

    std::optional<std::uint64_t> seed;
    unsigned threads = 0;

    auto* run_cmd = app.add_subcommand("run", "run the experiment described by a JSON config");
    std::string config;
    std::optional<std::string> out_dir;
    run_cmd->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", seed, "override the config's master seed");
    run_cmd->add_option("--threads", threads, "worker threads (0 = default)");
    run_cmd->add_option("--out-dir", out_dir, "override the config's output directory");

    auto* verify_cmd = app.add_subcommand("verify", "run a verification suite and print per-check results");
    std::string suite;
    bool list = false;
    verify_cmd->add_option("suite", suite, "suite name, or 'all'");
    verify_cmd->add_flag("--list", list, "list the suites");
    verify_cmd->add_option("--seed", seed, "master seed for stochastic suites");
    verify_cmd->add_option("--threads", threads, "worker threads (0 = default)");

    auto* list_cmd = app.add_subcommand("list-experiments", "list the experiment kinds a config can name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : photocorr::kExitInvalid;
    }

    if (*run_cmd) return run(config, seed, threads, out_dir);
    if (*verify_cmd) {
        if (list || suite.empty()) {
            for (const auto& info : photocorr::verify_suites()) std::cout << info.name << "\t" << info.summary << "\n";
            std::cout << "all\tevery suite except the full homodyne-reference\n";
            return suite.empty() && !list ? photocorr::kExitInvalid : 0;
        }
        return verify(suite, seed, threads);
    }
    if (*list_cmd) {
        for (const auto& e : photocorr::experiment_catalog()) {
            std::cout << e.name << "\t" << (e.stochastic ? "seeded" : "deterministic") << "\t" << e.summary << "\n";
        }
    }
    return 0;
}
