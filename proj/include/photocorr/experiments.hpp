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

// Configuration-driven experiment runner behind the command-line tool.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace photocorr {

struct ExperimentInfo {
    std::string name;
    std::string summary;
    bool stochastic = false;
};

/// network-sim, tes-analysis, homodyne, pdc, phasespace, nonclassicality.
const std::vector<ExperimentInfo>& experiment_catalog();

struct RunOptions {
    /// Replaces the config's "seed".
    std::optional<std::uint64_t> seed;
    /// 0 selects default_thread_count(). Results do not depend on it.
    unsigned threads = 0;
    /// Replaces the config's "output.directory".
    std::optional<std::filesystem::path> out_dir;
    /// Relative input paths in the config resolve against this directory.
    std::filesystem::path base_dir = ".";
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

struct RunOutcome {
    int exit_code = kExitOk;
    std::filesystem::path out_dir;
    /// Files written, in write order (summary.json or error.json last).
    std::vector<std::filesystem::path> files;
    /// Empty on success; otherwise the message also stored in error.json.
    std::string error;
};

/// Parses and validates `config_text`, runs the experiment and writes its
/// CSV tables plus summary.json into the output directory. Never throws for
/// bad input: schema violations give kExitInvalid and numerical failures
/// kExitNumerical, each with an error.json (when the directory is writable).
RunOutcome run_experiment(const std::string& config_text, const RunOptions& options);

/// Reads the file and resolves relative input paths against its directory.
RunOutcome run_experiment_file(const std::filesystem::path& config, RunOptions options);

}  // namespace photocorr
