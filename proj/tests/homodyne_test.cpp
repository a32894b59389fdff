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

#include "photocorr/homodyne.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "photocorr/error.hpp"

using namespace photocorr;

namespace {

// <q^2k> of |n> by integrating q^2k phi(q) He_n(q)^2 / n! on a fine grid
// (probabilists' Hermite polynomials; vacuum variance 1).
double fock_quadrature_moment(std::size_t n, std::size_t k) {
    const double h = 5e-4;
    const double limit = 24.0;
    double total = 0.0;
    double n_fact = std::tgamma(static_cast<double>(n) + 1.0);
    for (double q = -limit; q <= limit; q += h) {
        double prev = 1.0;
        double cur = q;
        double he = n == 0 ? 1.0 : q;
        for (std::size_t j = 1; j < n; ++j) {
            const double next = q * cur - static_cast<double>(j) * prev;
            prev = cur;
            cur = next;
            he = cur;
        }
        const double density = std::exp(-0.5 * q * q) / std::sqrt(2 * std::numbers::pi) * he * he / n_fact;
        total += std::pow(q, 2.0 * static_cast<double>(k)) * density * h;
    }
    return total;
}

// Phase-averaged <q^2k> of a coherent state: average over a theta grid of the
// Gaussian moments E[(mu + Z)^2k], mu = 2|alpha| cos(theta).
double coherent_quadrature_moment(double alpha2, std::size_t k) {
    const int steps = 4096;
    double total = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double mu = 2.0 * std::sqrt(alpha2) * std::cos(2 * std::numbers::pi * (i + 0.5) / steps);
        // E[(mu + Z)^2k] = sum_j C(2k, 2j) mu^(2k-2j) (2j - 1)!!
        double e = 0.0;
        double dfact = 1.0;
        for (std::size_t j = 0; j <= k; ++j) {
            if (j > 0) dfact *= static_cast<double>(2 * j - 1);
            const double binom = std::tgamma(2.0 * k + 1) / (std::tgamma(2.0 * j + 1) * std::tgamma(2.0 * (k - j) + 1));
            e += binom * std::pow(mu, 2.0 * static_cast<double>(k - j)) * dfact;
        }
        total += e / steps;
    }
    return total;
}

// (2k - 1)!!
double odd_double_factorial(std::size_t k) {
    double r = 1.0;
    for (std::size_t j = 1; j <= k; ++j) r *= static_cast<double>(2 * j - 1);
    return r;
}

}  // namespace

TEST(TransferMatrix, LowRows) {
    auto t = build_transfer_matrix(5);
    EXPECT_EQ(t(1, 0), 1.0);
    EXPECT_EQ(t(1, 1), 2.0);
    EXPECT_EQ(t(2, 0), 3.0);
    EXPECT_EQ(t(2, 1), 12.0);
    EXPECT_EQ(t(2, 2), 6.0);
    for (std::size_t k = 2; k <= 4; ++k) EXPECT_EQ(t(k, 0), odd_double_factorial(k));
    for (std::size_t k = 0; k <= 5; ++k)
        for (std::size_t m = 0; m <= k; ++m) EXPECT_GT(t(k, m), 0.0);
}

TEST(TransferMatrix, HermiteIntegrationOracle) {
    auto t = build_transfer_matrix(5);
    for (std::size_t n = 0; n <= 10; ++n) {
        for (std::size_t k = 0; k <= 5; ++k) {
            double predicted = 0.0;
            double falling = 1.0;
            for (std::size_t m = 0; m <= std::min(k, n); ++m) {
                predicted += t(k, m) * falling;
                falling *= static_cast<double>(n - m);
            }
            const double oracle = fock_quadrature_moment(n, k);
            EXPECT_NEAR(predicted, oracle, 1e-8 * oracle) << "n=" << n << " k=" << k;
        }
    }
}

TEST(TransferMatrix, ReproducesClosedFormSecondOrder) {
    auto t = build_transfer_matrix(2);
    for (auto [q2, q4] : {std::pair{3.0, 27.0}, std::pair{3.0, 21.0}, std::pair{1.7, 6.2}}) {
        const double closed = 4 * (q4 - 6 * q2 + 3) / (6 * (q2 - 1) * (q2 - 1));
        EXPECT_NEAR(normalized_moments_from_quadrature_moments(t, {1.0, q2, q4})[2], closed, 1e-13);
    }
}

TEST(TransferMatrix, ExactPopulationMoments) {
    auto t = build_transfer_matrix(5);
    std::vector<double> thermal(6), coherent(6);
    for (std::size_t k = 0; k <= 5; ++k) {
        thermal[k] = odd_double_factorial(k) * std::pow(3.0, static_cast<double>(k));
        coherent[k] = coherent_quadrature_moment(1.0, k);
    }
    EXPECT_NEAR(coherent[2], 21.0, 1e-10);
    auto g_th = normalized_moments_from_quadrature_moments(t, thermal);
    auto g_co = normalized_moments_from_quadrature_moments(t, coherent);
    for (std::size_t m = 2; m <= 5; ++m) {
        EXPECT_NEAR(g_th[m], std::tgamma(m + 1.0), 1e-10 * std::tgamma(m + 1.0));
        EXPECT_NEAR(g_co[m], 1.0, 1e-9);
    }
}

TEST(TransferMatrix, VacuumSignalRejected) {
    auto t = build_transfer_matrix(2);
    EXPECT_THROW(normalized_moments_from_quadrature_moments(t, {1.0, 0.9, 2.5}), NumericalError);
    EXPECT_THROW(build_transfer_matrix(13), InvalidInput);
}

TEST(Sampling, VarianceIdentities) {
    const std::uint64_t n = 2000000;
    auto vac = sample_quadratures({QuadratureStateKind::kCoherent, 0.0}, n, 1);
    auto th = sample_quadratures({QuadratureStateKind::kThermal, 1.0}, n, 2);
    auto co = sample_quadratures({QuadratureStateKind::kCoherent, 1.0}, n, 3);
    auto moment = [](const QuadratureBatch& b, int p) {
        double s = 0.0;
        for (double q : b.samples) s += std::pow(q, p);
        return s / static_cast<double>(b.samples.size());
    };
    // Standard errors: sqrt((E q^2p - (E q^p)^2) / n).
    EXPECT_NEAR(moment(vac, 2), 1.0, 5 * std::sqrt(2.0 / n));
    EXPECT_NEAR(moment(th, 2), 3.0, 5 * std::sqrt(18.0 / n));
    const double q8 = coherent_quadrature_moment(1.0, 4);
    EXPECT_NEAR(moment(co, 4), 21.0, 5 * std::sqrt((q8 - 441.0) / n));
    EXPECT_THROW(sample_quadratures({QuadratureStateKind::kThermal, -1.0}, 10, 1), InvalidInput);
}

TEST(Sampling, DeterministicAndThreadIndependent) {
    const std::uint64_t n = 3 * kQuadraturesPerChunk + 17;
    auto a = sample_quadratures({QuadratureStateKind::kCoherent, 1.0}, n, 5, 1);
    auto b = sample_quadratures({QuadratureStateKind::kCoherent, 1.0}, n, 5, 3);
    EXPECT_EQ(a.samples, b.samples);
    auto r1 = simulate_homodyne_moments({QuadratureStateKind::kThermal, 1.0}, 3, 4, 100000, 9, 1);
    auto r2 = simulate_homodyne_moments({QuadratureStateKind::kThermal, 1.0}, 3, 4, 100000, 9, 4);
    EXPECT_EQ(r1.report.values, r2.report.values);
}

TEST(Moments, StreamingMatchesMaterializedBlocks) {
    const QuadratureSource source{QuadratureStateKind::kCoherent, 1.0};
    const std::uint64_t per_block = kQuadraturesPerChunk + 1000;
    auto streamed = simulate_homodyne_moments(source, 4, 3, per_block, 77);
    QuadratureBatch all;
    for (std::size_t b = 0; b < 3; ++b) {
        auto part = sample_quadratures(source, per_block, block_seed(77, b));
        all.samples.insert(all.samples.end(), part.samples.begin(), part.samples.end());
    }
    auto batch = moments_from_quadratures(all, 4, 3);
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t m = 0; m <= 4; ++m)
            EXPECT_NEAR(streamed.block_values[b][m], batch.block_values[b][m], 1e-9 * std::abs(batch.block_values[b][m]));
}

TEST(Moments, ConsistentWithAnalyticValues) {
    auto th = simulate_homodyne_moments({QuadratureStateKind::kThermal, 1.0}, 4, 10, 400000, 11);
    auto co = simulate_homodyne_moments({QuadratureStateKind::kCoherent, 1.0}, 4, 10, 400000, 12);
    for (std::size_t m = 2; m <= 4; ++m) {
        EXPECT_NEAR(th.report.g(m), std::tgamma(m + 1.0), 4 * th.standard_error[m]) << m;
        EXPECT_NEAR(co.report.g(m), 1.0, 4 * co.standard_error[m]) << m;
    }
    EXPECT_NEAR(th.report.mean_photon_number, 1.0, 4 * th.report.mean_uncertainty / std::sqrt(10.0));
}

TEST(Moments, SpreadGrowsWithOrder) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (auto kind : {QuadratureStateKind::kCoherent, QuadratureStateKind::kThermal}) {
            auto r = simulate_homodyne_moments({kind, 1.0}, 5, 20, 50000, seed);
            for (std::size_t m = 2; m < 5; ++m) EXPECT_LT(r.report.sigma(m), r.report.sigma(m + 1)) << seed << " " << m;
        }
    }
}

TEST(Moments, DoublingSamplesShrinksSpreadBySqrtTwo) {
    double ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto a = simulate_homodyne_moments({QuadratureStateKind::kThermal, 1.0}, 2, 100, 20000, seed);
        auto b = simulate_homodyne_moments({QuadratureStateKind::kThermal, 1.0}, 2, 100, 40000, seed + 100);
        ratio += a.report.sigma(2) / b.report.sigma(2) / 3.0;
    }
    EXPECT_NEAR(ratio, std::sqrt(2.0), 0.25 * std::sqrt(2.0));
}

TEST(Moments, Errors) {
    QuadratureBatch b;
    b.samples = {0.1, 0.2, 0.3};
    EXPECT_THROW(moments_from_quadratures(b, 2, 1), InvalidInput);
    EXPECT_THROW(moments_from_quadratures(b, 2, 3), InvalidInput);
}

TEST(Csv, RoundTripIsBitExact) {
    auto batch = sample_quadratures({QuadratureStateKind::kThermal, 0.37}, 1000, 8);
    std::stringstream ss;
    write_quadratures_csv(ss, batch);
    auto back = read_quadratures_csv(ss);
    EXPECT_EQ(back.samples, batch.samples);
    EXPECT_EQ(back.label, batch.label);
    EXPECT_EQ(back.seed, 8u);
    std::stringstream bad("# state=x seed=1 count=3\nq\n0.5\n1.5\n");
    EXPECT_THROW(read_quadratures_csv(bad), InvalidInput);
}
