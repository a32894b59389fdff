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

// Phase-randomized homodyne detection: quadrature sampling and the inversion
// of phase-averaged even quadrature moments into normalized factorial moments.

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "photocorr/moments.hpp"

namespace photocorr {

enum class QuadratureStateKind { kCoherent, kThermal };

/// `mean` is |alpha|^2 for coherent light and n-bar for thermal light.
struct QuadratureSource {
    QuadratureStateKind kind = QuadratureStateKind::kCoherent;
    double mean = 1.0;

    std::string label() const;
    /// Throws InvalidInput for a negative or non-finite mean.
    void validate() const;
};

/// Quadrature samples in shot-noise units (vacuum variance 1).
struct QuadratureBatch {
    std::vector<double> samples;
    std::string label;
    std::uint64_t seed = 0;
};

/// Samples per independently seeded generator chunk.
inline constexpr std::uint64_t kQuadraturesPerChunk = std::uint64_t{1} << 20;

/// Coherent: q = 2|alpha| cos(theta) + N(0, 1) with theta uniform per sample.
/// Thermal: q ~ N(0, 2 n-bar + 1). Deterministic in (source, count, seed).
QuadratureBatch sample_quadratures(const QuadratureSource& source, std::uint64_t count, std::uint64_t seed,
                                   unsigned threads = 0);

/// c[k, m] with <q^2k>_phase-averaged = sum_{m <= k} c[k, m] <:N^m:>.
struct TransferMatrix {
    Eigen::MatrixXd c;
    std::size_t k_max() const { return static_cast<std::size_t>(c.rows()) - 1; }
    double operator()(std::size_t k, std::size_t m) const {
        return c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
    }
};

/// Closed form c[k, m] = (2k)! / ((k - m)! (m!)^2 2^(k - m)), accepted only
/// after it reproduces <n|(a + a^dag)^2k|n> for every Fock state n <= 10 to
/// 1e-8 relative; throws NumericalError otherwise. k_max <= 12.
TransferMatrix build_transfer_matrix(std::size_t k_max);

/// Solves the triangular system for <:N^m:>, m = 0..K, from
/// even_moments[k] = <q^2k>, k = 0..K (even_moments[0] = 1).
std::vector<double> factorial_moments_from_quadrature_moments(const TransferMatrix& t,
                                                              const std::vector<double>& even_moments);

/// g^(m) = <:N^m:> / <:N:>^m from quadrature moments. Throws NumericalError
/// when <:N:> <= 0 (signal indistinguishable from vacuum).
std::vector<double> normalized_moments_from_quadrature_moments(const TransferMatrix& t,
                                                               const std::vector<double>& even_moments);

/// Per-block estimates and their aggregate.
struct HomodyneMoments {
    /// values = block mean of g^(m); uncertainties = block standard deviation.
    MomentReport report;
    /// Standard error of the block mean (block std / sqrt(blocks)).
    std::vector<double> standard_error;
    /// block_values[b][m] = g^(m) from block b alone.
    std::vector<std::vector<double>> block_values;
    std::uint64_t samples_per_block = 0;
};

/// Splits `batch` into `block_count` contiguous blocks (remainder dropped),
/// estimates g^(1..m_max) per block and aggregates. Throws InvalidInput for
/// block_count < 2, m_max < 1 or blocks shorter than 2 samples.
HomodyneMoments moments_from_quadratures(const QuadratureBatch& batch, std::size_t m_max, std::size_t block_count);

/// Same estimate without materializing samples: block b is the batch
/// sample_quadratures(source, samples_per_block, block_seed(seed, b)), reduced
/// to power sums on the fly. Blocks run in parallel.
HomodyneMoments simulate_homodyne_moments(const QuadratureSource& source, std::size_t m_max, std::size_t blocks,
                                          std::uint64_t samples_per_block, std::uint64_t seed, unsigned threads = 0);

std::uint64_t block_seed(std::uint64_t seed, std::size_t block);

/// "# state=<label> seed=<seed> count=<n>" then "q" and one value per line.
void write_quadratures_csv(std::ostream& out, const QuadratureBatch& batch);
QuadratureBatch read_quadratures_csv(std::istream& in);

}  // namespace photocorr
