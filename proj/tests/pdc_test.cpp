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

#include "photocorr/pdc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "photocorr/error.hpp"

using namespace photocorr;

namespace {

// Double-Gaussian amplitude with widths a (along w_s + w_i) and b (along
// w_s - w_i). By Mehler's formula its Schmidt weights fall off as t^n with
// t = (R - 1) / (R + 1), R = a / b, so K = (1 + t^2) / (1 - t^2).
JointSpectralAmplitude double_gaussian(double a, double b, double half_width, std::size_t points) {
    auto axis = linear_grid(-half_width, half_width, points);
    return sample_jsa(axis, axis, [&](double x, double y) {
        return std::complex<double>(std::exp(-(x + y) * (x + y) / (2 * a * a) - (x - y) * (x - y) / (2 * b * b)), 0.0);
    });
}

double hermite_function(int n, double x) {
    const double g = std::exp(-x * x / 2) / std::pow(std::numbers::pi, 0.25);
    return n == 0 ? g : std::sqrt(2.0) * x * g;
}

SchmidtSpectrum equal_modes(std::size_t k) { return SchmidtSpectrum::from_weights(std::vector<double>(k, 1.0)); }

HeraldSetup herald(DetectorKind kind, double eta, std::size_t outcome = 1) {
    HeraldSetup s;
    s.detector.kind = kind;
    s.detector.efficiency = eta;
    s.outcome = outcome;
    return s;
}

}  // namespace

TEST(Schmidt, SeparableAmplitudeIsSingleMode) {
    auto axis = linear_grid(-6, 6, 81);
    auto jsa = sample_jsa(axis, axis, [](double x, double y) {
        return std::complex<double>(std::exp(-x * x / 2) * std::exp(-(y - 0.3) * (y - 0.3) / 3), 0.0);
    });
    auto s = schmidt_decompose(jsa, {.rank_cutoff = 1e-8, .max_residual = 1e-6, .max_resolution_drift = 1e-3,
                                     .max_edge_fraction = 1e-4});
    EXPECT_NEAR(s.effective_mode_number(), 1.0, 1e-9);
}

TEST(Schmidt, DoubleGaussianMatchesClosedForm) {
    auto jsa = double_gaussian(1.0, 0.1, 4.5, 361);
    auto s = schmidt_decompose(jsa);
    const double t = 9.0 / 11.0;
    const double oracle = (1 + t * t) / (1 - t * t);
    EXPECT_NEAR(s.effective_mode_number(), oracle, 1e-6 * oracle);
    for (std::size_t q = 1; q < 6; ++q) EXPECT_NEAR(s.weights[q] / s.weights[q - 1], t, 1e-6);
    EXPECT_LE(s.mode_number_error, 1e-3);
    EXPECT_LE(s.resolution_drift, 1e-3);
    double norm = 0.0;
    for (double w : s.weights) norm += w * w;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    EXPECT_TRUE(std::is_sorted(s.weights.rbegin(), s.weights.rend()));
}

TEST(Schmidt, TwoEqualModes) {
    auto axis = linear_grid(-9, 9, 121);
    auto jsa = sample_jsa(axis, axis, [](double x, double y) {
        return std::complex<double>((hermite_function(0, x) * hermite_function(0, y) +
                                     hermite_function(1, x) * hermite_function(1, y)) / std::sqrt(2.0), 0.0);
    });
    auto s = schmidt_decompose(jsa);
    ASSERT_EQ(s.weights.size(), 2u);
    EXPECT_NEAR(s.effective_mode_number(), 2.0, 1e-9);
    EXPECT_NEAR(s.weights[0], 1 / std::sqrt(2.0), 1e-9);
}

TEST(Schmidt, CoarseOrTruncatedGridsRejected) {
    EXPECT_THROW(schmidt_decompose(double_gaussian(1.0, 0.1, 4.5, 41)), ConvergenceError);
    EXPECT_THROW(schmidt_decompose(double_gaussian(1.0, 0.1, 1.0, 201)), ConvergenceError);
    JointSpectralAmplitude zero{{0, 1}, {0, 1}, Eigen::MatrixXcd::Zero(2, 2)};
    EXPECT_THROW(schmidt_decompose(zero), InvalidInput);
    JointSpectralAmplitude uneven{{0, 1, 3}, {0, 1}, Eigen::MatrixXcd::Ones(3, 2)};
    EXPECT_THROW(uneven.validate(), InvalidInput);
}

TEST(Schmidt, CsvRoundTrip) {
    auto jsa = double_gaussian(1.0, 0.5, 3.0, 13);
    jsa.amplitude(3, 4) = {0.25, -0.125};
    std::stringstream ss;
    write_jsa_csv(ss, jsa);
    auto back = read_jsa_csv(ss);
    EXPECT_EQ(back.signal_frequencies, jsa.signal_frequencies);
    EXPECT_TRUE(back.amplitude == jsa.amplitude);
    std::stringstream missing("omega_s,omega_i,re,im\n0,0,1,0\n0,1,1,0\n1,0,1,0\n");
    EXPECT_THROW(read_jsa_csv(missing), InvalidInput);
}

TEST(JointMoments, SingleModeExactValues) {
    auto sm = SchmidtSpectrum::from_weights({1.0});
    const double b = strength_for_mean(sm, 0.01);
    EXPECT_NEAR(std::pow(std::sinh(b), 2), 0.01, 1e-15);
    auto g11 = joint_moment(sm, b, 1, 1);
    EXPECT_NEAR(g11.exact, 102.0, 1e-9);
    EXPECT_NEAR(*g11.closed_form, 102.0, 1e-9);
    EXPECT_NEAR(joint_moment(sm, b, 2, 0).exact, 2.0, 1e-9);
    // Thermal pairs: <n^(2) n> = 6 n^3 + 4 n^2.
    EXPECT_NEAR(joint_moment(sm, b, 2, 1).exact, 6.0 + 4.0 / 0.01, 1e-7);
    EXPECT_FALSE(joint_moment(sm, b, 3, 1).closed_form.has_value());
}

TEST(JointMoments, ManyModesApproachPoissonLimit) {
    auto mm = equal_modes(200);
    auto g20 = joint_moment(mm, strength_for_mean(mm, 0.05), 2, 0);
    EXPECT_NEAR(g20.exact, 1.0 + 1.0 / 200, 1e-9);
    auto g21 = joint_moment(mm, strength_for_mean(mm, 0.1), 2, 1);
    EXPECT_NEAR(g21.exact, 21.0, 0.01 * 21.0);
}

TEST(JointMoments, ClosedFormsAgreeAtLowPower) {
    for (std::size_t k : {1u, 2u, 10u, 200u}) {
        auto spec = equal_modes(k);
        for (double n : {0.001, 0.01, 0.05}) {
            const double b = strength_for_mean(spec, n);
            for (auto [w, v] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 0}, {2, 1}}) {
                auto g = joint_moment(spec, b, w, v);
                EXPECT_LE(std::abs(g.exact - *g.closed_form) / g.exact, 5 * n) << k << " " << n << " " << w << v;
            }
        }
    }
}

TEST(JointMoments, G20IndependentOfPumpAndCarRelation) {
    std::vector<double> w;
    for (int q = 0; q < 12; ++q) w.push_back(std::pow(0.7, q));
    auto spec = SchmidtSpectrum::from_weights(w);
    const double k = spec.effective_mode_number();
    const double reference = joint_moment(spec, strength_for_mean(spec, 1e-4), 2, 0).exact;
    for (double n : {0.001, 0.01, 0.05}) {
        const double b = strength_for_mean(spec, n);
        EXPECT_LE(std::abs(joint_moment(spec, b, 2, 0).exact / reference - 1.0), 0.01);
        const double g11 = joint_moment(spec, b, 1, 1).exact;
        EXPECT_NEAR((g11 - 1.0 - 1.0 / k) * n, 1.0, 0.01);
        EXPECT_NEAR(PairSource::from_spectrum(spec).car(n), g11, 1e-9 * g11);
    }
}

TEST(JointMoments, Errors) {
    auto sm = SchmidtSpectrum::from_weights({1.0});
    EXPECT_THROW(joint_moment(sm, 0.1, 0, 0), InvalidInput);
    EXPECT_THROW(strength_for_mean(sm, 0.0), InvalidInput);
    EXPECT_THROW(SchmidtSpectrum::from_weights({-1.0, 1.0}), InvalidInput);
    EXPECT_THROW(twin_beam_joint(sm, 3.0), TruncationError);
}

TEST(Herald, PerfectPnrGivesFockStates) {
    auto joint = PairSource::single_mode().joint(0.3);
    for (std::size_t k : {1u, 2u}) {
        auto stats = herald_state(joint, herald(DetectorKind::kPnr, 1.0, k));
        EXPECT_EQ(stats[k], 1.0);
        EXPECT_EQ(stats.mean(), static_cast<double>(k));
    }
    auto one = herald_state(PairSource::multimode_limit().joint(0.3), herald(DetectorKind::kPnr, 1.0));
    EXPECT_EQ(moments_from_statistics(one, 2).g(2), 0.0);
}

TEST(Herald, ClickOnThermalMatchesGeometricSums) {
    const double x = 0.01;  // |xi|^2
    auto joint = PairSource::single_mode().joint(x / (1 - x));
    auto stats = herald_state(joint, herald(DetectorKind::kClick, 1.0));
    double s0 = 0, s1 = 0, s2 = 0;
    for (int n = 1; n < 60; ++n) {
        const double w = std::pow(x, n);
        s0 += w;
        s1 += n * w;
        s2 += n * (n - 1.0) * w;
    }
    const double oracle = s2 * s0 / (s1 * s1);
    EXPECT_NEAR(moments_from_statistics(stats, 2).g(2), oracle, 1e-12);
    EXPECT_NEAR(oracle, 2 * x, 1e-12);
}

TEST(Herald, WeakHeraldsConverge) {
    auto joint = PairSource::single_mode().joint(0.2);
    const double click = moments_from_statistics(herald_state(joint, herald(DetectorKind::kClick, 1e-3)), 2).g(2);
    const double pnr = moments_from_statistics(herald_state(joint, herald(DetectorKind::kPnr, 1e-3)), 2).g(2);
    EXPECT_NEAR(click, pnr, 1e-2 * pnr);
    const double pnr_high = moments_from_statistics(herald_state(joint, herald(DetectorKind::kPnr, 0.9)), 2).g(2);
    const double click_high = moments_from_statistics(herald_state(joint, herald(DetectorKind::kClick, 0.9)), 2).g(2);
    EXPECT_LT(pnr_high, 0.5 * click_high);
}

TEST(Herald, Errors) {
    Eigen::MatrixXd vac = Eigen::MatrixXd::Zero(3, 3);
    vac(0, 0) = 1.0;
    EXPECT_THROW(herald_state(JointPhotonStatistics(vac), herald(DetectorKind::kPnr, 1.0)), InvalidInput);
    auto dark = herald(DetectorKind::kPnr, 0.5);
    dark.detector.dark_count = 0.1;
    EXPECT_THROW(dark.validate(), InvalidInput);
}

TEST(HeraldCurve, Trends) {
    std::vector<double> cars = {3, 5, 10, 30, 100, 1000};
    auto pnr = g2h_curve(PairSource::single_mode(), cars, herald(DetectorKind::kPnr, 1.0));
    for (const auto& p : pnr) EXPECT_EQ(p.g2h, 0.0);
    for (auto source : {PairSource::single_mode(), PairSource::multimode_limit()}) {
        std::vector<double> previous;
        for (double eta : {1.0, 0.7, 0.3, 0.05}) {
            for (auto kind : {DetectorKind::kClick, DetectorKind::kPnr}) {
                auto curve = g2h_curve(source, cars, herald(kind, eta));
                for (std::size_t i = 0; i < curve.size(); ++i) {
                    EXPECT_NEAR(source.car(curve[i].mean_photon_number), cars[i], 1e-9 * cars[i]);
                    if (i > 0) EXPECT_LE(curve[i].g2h, curve[i - 1].g2h) << source.label() << " " << eta;
                }
                if (kind == DetectorKind::kClick) {
                    if (!previous.empty())
                        for (std::size_t i = 0; i < curve.size(); ++i) EXPECT_GE(curve[i].g2h, previous[i] * (1 - 1e-12));
                    previous.clear();
                    for (const auto& p : curve) previous.push_back(p.g2h);
                }
            }
        }
    }
    auto click = g2h_curve(PairSource::single_mode(), {1e5}, herald(DetectorKind::kClick, 1.0));
    EXPECT_LT(click[0].g2h, 1e-4);
}

TEST(HeraldCurve, ThreadIndependentAndErrors) {
    std::vector<double> cars = {4, 8, 16, 32};
    auto a = g2h_curve(PairSource::multimode_limit(), cars, herald(DetectorKind::kClick, 0.5), 1);
    auto b = g2h_curve(PairSource::multimode_limit(), cars, herald(DetectorKind::kClick, 0.5), 3);
    for (std::size_t i = 0; i < cars.size(); ++i) EXPECT_EQ(a[i].g2h, b[i].g2h);
    EXPECT_THROW(g2h_curve(PairSource::single_mode(), {1.5}, herald(DetectorKind::kClick, 1.0)), InvalidInput);
    std::stringstream ss;
    write_herald_curve_csv(ss, a);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "car,mean_photon_number,g2h,success_probability");
}

TEST(TwinBeamNonclassicality, CauchySchwarz) {
    EXPECT_TRUE(twin_beam_nonclassicality(102, 2, 2).nonclassical);
    EXPECT_FALSE(twin_beam_nonclassicality(1, 1, 1).nonclassical);
    EXPECT_TRUE(twin_beam_nonclassicality(2.001, 2, 2).nonclassical);
    EXPECT_FALSE(twin_beam_nonclassicality(1.999, 2, 2).nonclassical);
    EXPECT_FALSE(twin_beam_nonclassicality(2.001, 2, 2, 0.01).nonclassical);
    EXPECT_NEAR(twin_beam_nonclassicality(3, 2, 2, 0.1, 0.1, 0.1).uncertainty, std::sqrt(0.01 + 2 * 0.0025), 1e-12);
}
