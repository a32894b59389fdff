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

// Built-in verification suites: each check reports what was measured, what
// was expected and the tolerance it was judged with.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace photocorr {

struct Check {
    std::string name;
    bool passed = false;
    std::string measured;
    std::string expected;
    std::string tolerance;
};

struct SuiteResult {
    std::string suite;
    std::vector<Check> checks;
    double seconds = 0.0;

    bool passed() const;
    /// First failing check, or nullptr.
    const Check* first_failure() const;
};

struct SuiteInfo {
    std::string name;
    std::string summary;
};

/// Registered suites in run order; "all" runs every one except the full
/// "homodyne-reference" (use "homodyne-reference-fast" or request it by name).
const std::vector<SuiteInfo>& verify_suites();

struct VerifyOptions {
    std::uint64_t seed = 42;
    /// 0 selects default_thread_count().
    unsigned threads = 0;
    /// Scratch space for the reproducibility suite's output files.
    std::filesystem::path scratch_dir = std::filesystem::temp_directory_path() / "photocorr-verify";
};

/// Throws InvalidInput for an unknown suite name ("all" is not a suite).
SuiteResult run_suite(const std::string& name, const VerifyOptions& options);

/// One line per check, then a suite verdict line.
void print_suite(std::ostream& out, const SuiteResult& result);

}  // namespace photocorr
