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

// Acceptance runner: one PASS/FAIL line per acceptance criterion. Each
// criterion is backed by a verify suite whose tolerances live in verify.cpp.
//
//   photocorr_acceptance [--criterion N] [--fast] [--verbose] [--seed S]
//
// Exit status is 0 only when every selected criterion passes.

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include "photocorr/verify.hpp"

namespace {

struct Criterion {
    int number;
    const char* title;
    const char* suite;
};

constexpr Criterion kCriteria[] = {
    {1, "analytic moment identities", "analytic-moments"},
    {2, "homodyne reference-table reproduction", "homodyne-reference"},
    {3, "HBT invariance to splitting ratio and loss", "hbt-invariance"},
    {4, "m-fold estimator on an 8-detector network", "mfold"},
    {5, "deconvolution round trip", "deconvolution"},
    {6, "TES pipeline end to end", "tes-pipeline"},
    {7, "PDC closed forms", "pdc-closed-forms"},
    {8, "heralding", "heralding"},
    {9, "phase-space reconstruction", "phasespace"},
    {10, "nonclassicality suite", "nonclassicality"},
    {11, "reproducibility", "reproducibility"},
};

int usage() {
    std::cerr << "usage: photocorr_acceptance [--criterion N] [--fast] [--verbose] [--seed S]\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    bool fast = false, verbose = false;
    photocorr::VerifyOptions options;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--fast") {
            fast = true;
        } else if (arg == "--verbose") {
            verbose = true;
        } else if (arg == "--criterion" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
            if (only < 1 || only > 11) return usage();
        } else if (arg == "--seed" && i + 1 < argc) {
            options.seed = std::strtoull(argv[++i], nullptr, 10);
        } else {
            return usage();
        }
    }

    int failed = 0;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.number != only) continue;
        const std::string suite = fast && c.number == 2 ? "homodyne-reference-fast" : c.suite;
        const auto result = photocorr::run_suite(suite, options);
        std::size_t passed = 0;
        for (const auto& check : result.checks) passed += check.passed;
        std::cout << (result.passed() ? "PASS" : "FAIL") << "  criterion " << c.number << ": " << c.title << " ["
                  << suite << ", " << passed << "/" << result.checks.size() << " checks, " << result.seconds << " s]";
        if (const auto* f = result.first_failure()) {
            std::cout << " first failure: " << f->name << ": measured " << f->measured << ", expected " << f->expected;
            if (f->tolerance != "-") std::cout << ", tolerance " << f->tolerance;
        }
        std::cout << "\n";
        if (verbose) photocorr::print_suite(std::cout, result);
        failed += !result.passed();
    }
    return failed == 0 ? 0 : 1;
}
