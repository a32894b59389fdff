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

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace photocorr {

/// SplitMix64 finalizer. Used to derive independent stream keys from a
/// master seed; never used as a generator on its own.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Random stream with a fully specified output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The uniform and normal transforms are implemented here rather than taken
/// from <random>, whose distributions are implementation-defined, so that a
/// (seed, stream) pair produces the same numbers on every conforming platform.
class Rng {
   public:
    /// Stream `stream` of the family keyed by `master_seed`.
    Rng(std::uint64_t master_seed, std::uint64_t stream)
        : engine_(mix64(mix64(master_seed) ^ mix64(stream + 0x5851F42D4C957F2DULL))) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal (Marsaglia polar method; second variate cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

    bool bernoulli(double p) { return uniform() < p; }

   private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Worker count used when a caller passes 0: the PHOTOCORR_THREADS
/// environment variable if set, else std::thread::hardware_concurrency().
unsigned default_thread_count();

/// Runs `task(chunk)` for chunk = 0..chunks-1 on up to `threads` workers
/// (0 selects default_thread_count()). Chunks are claimed dynamically, so
/// tasks must write only to per-chunk storage; callers then reduce in chunk
/// order, which makes results independent of the worker count.
void parallel_chunks(std::size_t chunks, unsigned threads,
                     const std::function<void(std::size_t)>& task);

}  // namespace photocorr
