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

#include "photocorr/phasespace.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "photocorr/error.hpp"

using namespace photocorr;

namespace {

const double kPi = std::numbers::pi;

PhaseSpaceState fock(std::size_t k) { return make_state(FockState{k}, k); }

MomentReport displaced_report(const PhaseSpaceState& state, double re, double im, std::size_t m_max) {
    return moments_from_statistics(displaced_statistics(state, {re, im}, m_max), m_max);
}

}  // namespace

TEST(DisplacedStatistics, ClosedForms) {
    auto vac = displaced_statistics(fock(0), {0.6, -0.8});
    auto poisson = make_state(PoissonState{1.0}, vac.n_max());
    for (std::size_t n = 0; n <= 20; ++n) EXPECT_NEAR(vac[n], poisson[n], 1e-14);

    auto one = displaced_statistics(fock(1), {0.0, 0.0});
    EXPECT_EQ(one[0], 0.0);
    EXPECT_NEAR(one[1], 1.0, 1e-15);

    EXPECT_NEAR(displaced_statistics(fock(1), {1.0, 0.0})[0], std::exp(-1.0), 1e-14);
    EXPECT_NEAR(displaced_statistics(fock(1), DisplacementAmplitude::polar(2.0, 0.3))[1], 9 * std::exp(-4.0), 1e-13);
    EXPECT_LE(displaced_statistics(fock(1), {2.0, 0.0}).tail_bound(), kDisplacedTailTolerance);
}

TEST(DisplacedStatistics, PureStateMatchesCoherentOverlap) {
    const double s = 1 / std::sqrt(2.0);
    FockAmplitudeVector cat({s, s});
    for (double a : {0.5, -0.7, 1.3}) {
        // Q = |<alpha|psi>|^2 / pi with <alpha|1> = conj(alpha) exp(-|alpha|^2 / 2).
        const double oracle = std::exp(-a * a) * (1 + a) * (1 + a) / 2;
        EXPECT_NEAR(displaced_statistics(cat, {a, 0.0})[0], oracle, 1e-14);
    }
    // A pure Fock vector and its diagonal form agree.
    auto pure = displaced_statistics(FockAmplitudeVector::fock(2), {0.4, 0.9});
    auto diag = displaced_statistics(fock(2), {0.4, 0.9});
    for (std::size_t n = 0; n <= 30; ++n) EXPECT_NEAR(pure[n], diag[n], 1e-15);
}

TEST(DisplacedStatistics, CapRaisesTruncation) {
    EXPECT_THROW(displaced_statistics(fock(1), {18.0, 0.0}), TruncationError);
}

TEST(Reconstruction, FockOneAtOrigin) {
    auto r = displaced_report(fock(1), 0, 0, 22);
    for (std::size_t m : {2u, 6u, 21u}) {
        auto w = wigner_from_moments(r, m);
        EXPECT_EQ(w.value, -2 / kPi);
        EXPECT_TRUE(w.converged);
        EXPECT_EQ(w.residual, 0.0);
        EXPECT_EQ(q_from_moments(r, m).value, 0.0);
        EXPECT_EQ(chi_squared_fock(1, r, m).value, 1.0);
    }
}

TEST(Reconstruction, FockOneClosedForms) {
    auto state = fock(1);
    auto at1 = displaced_report(state, 1, 0, 22);
    auto stats1 = displaced_statistics(state, {1.0, 0.0}, 22);
    EXPECT_NEAR(wigner_from_moments(at1, 21).value, wigner_from_statistics(stats1), 1e-4);
    EXPECT_NEAR(wigner_from_moments(at1, 21).value, 2 / kPi * 3 * std::exp(-2.0), 1e-4);
    EXPECT_NEAR(q_from_moments(at1, 21).value, std::exp(-1.0) / kPi, 1e-6);
    EXPECT_NEAR(chi_squared_fock(1, at1, 21).value, 0.0, 1e-6);

    auto at2 = displaced_report(state, 2, 0, 22);
    EXPECT_NEAR(chi_squared_fock(1, at2, 21).value, 9 * std::exp(-4.0), 1e-3);
    auto distorted = wigner_from_moments(at2, 6);
    EXPECT_FALSE(distorted.converged);
    EXPECT_GT(std::abs(distorted.value - wigner_from_statistics(displaced_statistics(state, {2.0, 0.0}))), 1.0);
}

TEST(Reconstruction, VacuumIsGaussian) {
    for (double a = 0.1; a <= 1.0001; a += 0.1) {
        auto r = displaced_report(fock(0), a, 0, 21);
        const double gauss = 2 / kPi * std::exp(-2 * a * a);
        auto w21 = wigner_from_moments(r, 21);
        EXPECT_TRUE(w21.converged) << a;
        EXPECT_NEAR(w21.value, gauss, 1e-10);
        EXPECT_NEAR(q_from_moments(r, 21).value, std::exp(-a * a) / kPi, 1e-12);
        if (a <= 0.6) {
            auto w6 = wigner_from_moments(r, 6);
            EXPECT_TRUE(w6.converged) << a;
            EXPECT_NEAR(w6.value, gauss, 10 * w6.residual);
        }
    }
}

TEST(Reconstruction, FlaggedValuesMatchOracles) {
    const std::vector<PhaseSpaceState> states = {fock(1), fock(2), make_state(ThermalState{0.5}, 60),
                                                 make_state(PoissonState{0.8}, 40)};
    for (const auto& state : states) {
        auto grid = reconstruct_grid(state, radial_grid(0.0, 2.0, 21, 0.4), {6, 11, 16, 21}, 1, 1);
        for (const auto& p : grid.points) {
            if (p.wigner.converged) {
                EXPECT_LE(std::abs(p.wigner.value - p.wigner_oracle), std::max(10 * p.wigner.residual, 1e-12));
                EXPECT_LE(std::abs(p.wigner.value - p.wigner_oracle), 1e-4);
                EXPECT_LE(std::abs(p.wigner.value), 2 / kPi + 1e-9);
            }
            if (p.q.converged) {
                EXPECT_LE(std::abs(p.q.value - p.q_oracle), std::max(10 * p.q.residual, 1e-12));
                EXPECT_GE(p.q.value, -1e-9);
                EXPECT_LE(p.q.value, 1 / kPi + 1e-9);
            }
            if (p.chi2.converged) EXPECT_LE(std::abs(p.chi2.value - p.chi2_oracle), std::max(10 * p.chi2.residual, 1e-12));
        }
    }
}

TEST(Reconstruction, ValidityWidensWithOrder) {
    auto grid = reconstruct_grid(fock(1), radial_grid(0.0, 2.5, 26), {6, 11, 16, 21}, 1, 2);
    std::vector<double> reach(4, 0.0);
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const auto& p = grid.points[i];
        const bool all = p.wigner.converged && p.q.converged && p.chi2.converged;
        if (all) reach[i % 4] = std::max(reach[i % 4], p.alpha.magnitude());
        if (p.m_max == 6 && p.alpha.magnitude() >= 1.0) EXPECT_FALSE(p.wigner.converged || p.q.converged || p.chi2.converged);
        EXPECT_GE(p.q_oracle, 0.0);
    }
    for (std::size_t j = 1; j < 4; ++j) EXPECT_GT(reach[j], reach[j - 1]);
}

TEST(Reconstruction, PhaseIndependentForFockStates) {
    for (std::size_t k : {1u, 3u}) {
        auto ref = displaced_report(fock(k), 1.1, 0, 22);
        for (int j = 1; j < 8; ++j) {
            auto r = moments_from_statistics(
                displaced_statistics(fock(k), DisplacementAmplitude::polar(1.1, j * kPi / 4), 22), 22);
            EXPECT_NEAR(wigner_from_moments(r, 21).value, wigner_from_moments(ref, 21).value, 1e-10);
            EXPECT_NEAR(q_from_moments(r, 21).value, q_from_moments(ref, 21).value, 1e-10);
            EXPECT_NEAR(chi_squared_fock(1, r, 21).value, chi_squared_fock(1, ref, 21).value, 1e-10);
        }
    }
}

TEST(Reconstruction, NoisyReportUncertainty) {
    auto r = MomentReport::make({1, 1, 2}, {0, 0, 0.1}, 0.5, 0.0, MomentSource::kMeasured);
    auto w = wigner_from_moments(r, 2);
    EXPECT_NEAR(w.value, 2 / kPi * (1 - 2 * 0.5 + 2 * 2 * 0.25), 1e-15);
    EXPECT_NEAR(w.uncertainty, 2 / kPi * 2 * 0.25 * 0.1, 1e-15);
    EXPECT_THROW(chi_squared_fock(1, r, 2), InvalidInput);
}

TEST(Reconstruction, GridCsvAndDeterminism) {
    auto a = reconstruct_grid(fock(1), radial_grid(0.0, 1.0, 3), {6, 21}, 1, 1);
    auto b = reconstruct_grid(fock(1), radial_grid(0.0, 1.0, 3), {6, 21}, 1, 3);
    std::stringstream sa, sb;
    write_reconstruction_csv(sa, a);
    write_reconstruction_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    std::string header;
    std::getline(sa, header);
    EXPECT_EQ(header.substr(0, 51), "re_alpha,im_alpha,m_max,W,Q,chi2,residual,converged");
    int rows = 0;
    for (std::string line; std::getline(sa, line);) ++rows;
    EXPECT_EQ(rows, 6);
    EXPECT_THROW(reconstruct_grid(fock(1), radial_grid(0, 1, 2), {}), InvalidInput);
    auto vac = reconstruct_grid(fock(0), radial_grid(0.0, 0.0, 1), {6});
    EXPECT_EQ(vac.points[0].wigner.value, 2 / kPi);
}
