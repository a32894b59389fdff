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

#include "photocorr/detection.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "photocorr/error.hpp"
#include "photocorr/moments.hpp"

using namespace photocorr;

namespace {

DetectorModel click(double eta, double dark = 0.0) { return {DetectorKind::kClick, eta, dark}; }

// Enumerates every fate (lost, or bin b) of each of n photons.
double brute_force_clicks(std::size_t bins, double eta, std::size_t n, std::size_t k) {
    double total = 0.0;
    std::vector<std::size_t> fate(n, 0);  // 0 = lost, b + 1 = bin b
    std::function<void(std::size_t, double)> rec = [&](std::size_t i, double prob) {
        if (i == n) {
            std::vector<bool> lit(bins, false);
            for (auto f : fate)
                if (f > 0) lit[f - 1] = true;
            if (static_cast<std::size_t>(std::count(lit.begin(), lit.end(), true)) == k) total += prob;
            return;
        }
        fate[i] = 0;
        rec(i + 1, prob * (1.0 - eta));
        for (std::size_t b = 0; b < bins; ++b) {
            fate[i] = b + 1;
            rec(i + 1, prob * eta / static_cast<double>(bins));
        }
    };
    rec(0, 1.0);
    return total;
}

}  // namespace

TEST(Network, PathProbabilities) {
    auto spec = NetworkSpec::balanced(2, click(1.0));
    EXPECT_EQ(spec.outputs(), 8u);
    for (double p : spec.path_probabilities()) EXPECT_DOUBLE_EQ(p, 0.125);
    auto hbt = NetworkSpec::hbt(0.7, click(1.0), click(1.0));
    EXPECT_DOUBLE_EQ(hbt.path_probabilities()[0], 0.7);
    EXPECT_NEAR(hbt.path_probabilities()[1], 0.3, 1e-15);
}

TEST(Network, Validation) {
    EXPECT_THROW(NetworkSpec::hbt(1.0, click(1.0), click(1.0)), InvalidInput);
    EXPECT_THROW(NetworkSpec::hbt(0.5, click(1.2), click(1.0)), InvalidInput);
    EXPECT_THROW(NetworkSpec::balanced(4, click(1.0)), InvalidInput);
    EXPECT_THROW(NetworkSpec::balanced(1, {DetectorKind::kPnr, 1.0, 0.0}), InvalidInput);
    EXPECT_THROW(NetworkSpec::balanced(1, click(0.5, 1.0)), InvalidInput);
}

TEST(Simulate, SinglePhotonNeverCoincides) {
    auto rec = simulate_network(make_state(FockState{1}, 2), NetworkSpec::hbt(0.5, click(1.0), click(1.0)), 100000, {7, 1});
    EXPECT_EQ(rec.counts[3], 0u);
    EXPECT_EQ(rec.counts[0], 0u);
    EXPECT_EQ(rec.trials, 100000u);
}

TEST(Simulate, TwoPhotonsInEightOutputs) {
    const std::uint64_t trials = 400000;
    auto rec = simulate_network(make_state(FockState{2}, 2), NetworkSpec::balanced(2, click(1.0)), trials, {11, 1});
    const double p = rec.click_number_distribution()[2];
    const double sigma = std::sqrt(7.0 / 8.0 * (1.0 / 8.0) / static_cast<double>(trials));
    EXPECT_NEAR(p, 7.0 / 8.0, 4 * sigma);
    EXPECT_NEAR(rec.click_number_distribution()[1] + p, 1.0, 1e-15);
    // Two photons cannot fire three detectors.
    EXPECT_EQ(estimate_gm_mfold(rec, {0, 1, 2}).value, 0.0);
}

TEST(Simulate, VacuumAndDarkCounts) {
    auto rec = simulate_network(make_state(FockState{0}, 1), NetworkSpec::balanced(1, click(1.0)), 50000, {3, 1});
    EXPECT_EQ(rec.counts[0], 50000u);
    auto dark = simulate_network(make_state(FockState{0}, 1), NetworkSpec::balanced(1, click(1.0, 0.01)), 400000, {3, 1});
    for (std::size_t o = 0; o < 4; ++o) EXPECT_NEAR(dark.marginal(o), 0.01, 5 * std::sqrt(0.01 / 400000));
    // Independent dark counts factorize: g2 = 1.
    auto g = estimate_gm_mfold(dark, {0, 1});
    EXPECT_NEAR(g.value, 1.0, 4 * g.std_error);
}

TEST(Simulate, DeterministicAndThreadIndependent) {
    const auto input = make_state(ThermalState{0.3}, 40);
    const auto spec = NetworkSpec::balanced(2, click(0.7, 1e-3));
    const std::uint64_t trials = 3 * kTrialsPerChunk + 12345;
    auto a = simulate_network(input, spec, trials, {99, 1});
    auto b = simulate_network(input, spec, trials, {99, 3});
    auto c = simulate_network(input, spec, trials, {100, 1});
    EXPECT_EQ(a.counts, b.counts);
    EXPECT_NE(a.counts, c.counts);
}

TEST(Estimators, HbtThermalIndependentOfRatioAndLoss) {
    const auto thermal = make_state(ThermalState{0.05}, 40);
    const std::uint64_t trials = 4000000;
    auto a = estimate_g2_hbt(simulate_network(thermal, NetworkSpec::hbt(0.5, click(0.3), click(0.3)), trials, {1, 1}));
    auto b = estimate_g2_hbt(simulate_network(thermal, NetworkSpec::hbt(0.7, click(0.1), click(0.9)), trials, {2, 1}));
    EXPECT_NEAR(a.value, 2.0, 3 * a.std_error);
    EXPECT_NEAR(b.value, 2.0, 3 * b.std_error);
    EXPECT_NEAR(a.value, b.value, 3 * std::hypot(a.std_error, b.std_error));
    auto coherent = estimate_g2_hbt(
        simulate_network(make_state(PoissonState{0.05}, 30), NetworkSpec::hbt(0.5, click(0.3), click(0.3)), trials, {3, 1}));
    EXPECT_NEAR(coherent.value, 1.0, 3 * coherent.std_error);
}

TEST(Estimators, StandardErrorMatchesReplicateSpread) {
    const auto thermal = make_state(ThermalState{0.2}, 40);
    const auto spec = NetworkSpec::hbt(0.5, click(0.5), click(0.5));
    std::vector<double> values;
    double mean_error = 0.0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto e = estimate_g2_hbt(simulate_network(thermal, spec, 100000, {seed, 1}));
        values.push_back(e.value);
        mean_error += e.std_error / 40.0;
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / 40.0;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean) / 39.0;
    EXPECT_NEAR(std::sqrt(var) / mean_error, 1.0, 0.3);
}

TEST(Estimators, PooledMatchesSingleSubsetInExpectation) {
    const auto thermal = make_state(ThermalState{0.3}, 40);
    auto rec = simulate_network(thermal, NetworkSpec::balanced(1, click(1.0)), 2000000, {5, 1});
    auto pooled = estimate_gm_pooled(rec, 2);
    auto single = estimate_gm_mfold(rec, {1, 3});
    EXPECT_LT(pooled.std_error, single.std_error);
    EXPECT_NEAR(pooled.value, single.value, 3 * single.std_error);
    // m = 2 over two detectors is the single-subset estimate.
    auto hbt = simulate_network(thermal, NetworkSpec::hbt(0.5, click(1.0), click(1.0)), 200000, {5, 1});
    EXPECT_NEAR(estimate_gm_pooled(hbt, 2).value, estimate_g2_hbt(hbt).value, 1e-12);
    EXPECT_NEAR(estimate_gm_pooled(hbt, 2).std_error, estimate_g2_hbt(hbt).std_error, 1e-12);
}

TEST(Estimators, Errors) {
    auto rec = simulate_network(make_state(FockState{0}, 1), NetworkSpec::hbt(0.5, click(1.0), click(1.0)), 10, {1, 1});
    EXPECT_THROW(estimate_g2_hbt(rec), InvalidInput);
    auto rec8 = simulate_network(make_state(FockState{2}, 2), NetworkSpec::balanced(2, click(1.0)), 1000, {1, 1});
    EXPECT_THROW(estimate_gm_mfold(rec8, {0, 0}), InvalidInput);
    EXPECT_THROW(estimate_gm_mfold(rec8, {0, 9}), InvalidInput);
    EXPECT_THROW(estimate_gm_pooled(rec8, 9), InvalidInput);
}

TEST(Convolution, MatchesBruteForce) {
    for (std::size_t bins : {1u, 3u, 4u}) {
        for (double eta : {1.0, 0.6, 0.0}) {
            auto c = convolution_matrix(bins, eta, 4);
            for (std::size_t n = 0; n <= 4; ++n) {
                EXPECT_NEAR(c.col(static_cast<Eigen::Index>(n)).sum(), 1.0, 1e-12);
                for (std::size_t k = 0; k <= bins; ++k) {
                    EXPECT_NEAR(c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n)),
                                brute_force_clicks(bins, eta, n, k), 1e-13)
                        << bins << " " << eta << " " << n << " " << k;
                }
            }
        }
    }
    auto c8 = convolution_matrix(8, 1.0, 2);
    EXPECT_NEAR(c8(2, 2), 7.0 / 8.0, 1e-15);
    EXPECT_NEAR(c8(1, 2), 1.0 / 8.0, 1e-15);
    EXPECT_EQ(c8(1, 1), 1.0);
    auto c0 = convolution_matrix(8, 0.0, 5);
    for (int n = 0; n <= 5; ++n) EXPECT_EQ(c0(0, n), 1.0);
    auto wide = convolution_matrix(16, 0.37, 40);
    for (int n = 0; n <= 40; ++n) EXPECT_NEAR(wide.col(n).sum(), 1.0, 1e-12);
}

TEST(Deconvolution, RoundTripWellConditioned) {
    for (StateSpec spec : {StateSpec{ThermalState{0.5}}, StateSpec{PoissonState{1.0}}, StateSpec{FockState{3}}}) {
        // Truncated input: forward and inverse share the same n_max.
        auto full = make_state(spec, 60, 1.0);
        std::vector<double> head(full.probs().begin(), full.probs().begin() + 5);
        auto rho = PhotonStatistics::from_weights(head);
        auto clicks = convolve_statistics(rho, 16, 0.2);
        auto result = deconvolve_statistics(clicks, 16, 0.2, 4);
        for (std::size_t n = 0; n <= 4; ++n) EXPECT_NEAR(result.statistics[n], rho[n], 1e-9);
        EXPECT_LT(result.residual, 1e-12);
        EXPECT_LT(result.clipped_mass, 1e-12);
    }
}

TEST(Deconvolution, PoissonTotalVariation) {
    auto rho = make_state(PoissonState{0.5}, 40);
    auto result = deconvolve_statistics(convolve_statistics(rho, 8, 0.6), 8, 0.6, 8);
    double tv = 0.0;
    for (std::size_t n = 0; n <= 40; ++n) tv += std::abs(result.statistics[n] - rho[n]);
    EXPECT_LE(0.5 * tv, 1e-6);
    EXPECT_GT(result.condition_number, 1.0);
}

TEST(Deconvolution, SinglePhotonManyBins) {
    auto result = deconvolve_statistics(convolve_statistics(make_state(FockState{1}, 4), 64, 1.0), 64, 1.0, 4);
    EXPECT_NEAR(result.statistics[1], 1.0, 1e-12);
    EXPECT_NEAR(result.statistics[0], 0.0, 1e-12);
}

TEST(Deconvolution, Errors) {
    std::vector<double> clicks(9, 1.0 / 9.0);
    EXPECT_THROW(deconvolve_statistics(clicks, 8, 0.0, 4), InvalidInput);
    EXPECT_THROW(deconvolve_statistics(clicks, 7, 0.5, 4), InvalidInput);
    EXPECT_THROW(deconvolve_statistics(clicks, 8, 0.5, 12), IllConditionedError);
    try {
        deconvolve_statistics(clicks, 8, 0.05, 8);
        FAIL() << "expected ill-conditioning";
    } catch (const IllConditionedError& e) {
        EXPECT_GT(e.condition_number(), 1e12);
    }
    // A click vector no photon statistics can produce leaves a residual.
    std::vector<double> impossible(17, 0.0);
    impossible[16] = 1.0;
    EXPECT_THROW(deconvolve_statistics(impossible, 16, 0.2, 3), ConvergenceError);
}

TEST(Deconvolution, SampledThermalRecoversG2WhileRawClicksAreBiased) {
    auto rec = simulate_network(make_state(ThermalState{1.0}, 60), NetworkSpec::balanced(2, click(0.25)), 1000000, {21, 1});
    auto inverted = estimate_gm_deconvolved(rec, 0.25, 2);
    auto raw = estimate_gm_raw_clicks(rec, 2);
    EXPECT_NEAR(inverted.value, 2.0, 3 * inverted.std_error);
    EXPECT_LT(raw.value, 2.0 - 10 * raw.std_error);
}

namespace {

// A record whose click-number frequencies equal `clicks` to ~1e-16.
ClickRecord record_from_click_distribution(const std::vector<double>& clicks) {
    ClickRecord fake;
    fake.detectors = clicks.size() - 1;
    fake.trials = 10000000000000000ULL;
    fake.counts.assign(std::size_t{1} << fake.detectors, 0);
    std::uint64_t assigned = 0;
    for (std::size_t k = 1; k < clicks.size(); ++k) {
        const auto c = static_cast<std::uint64_t>(std::llround(clicks[k] * 1e16));
        fake.counts[(std::size_t{1} << k) - 1] = c;
        assigned += c;
    }
    fake.counts[0] = fake.trials - assigned;
    return fake;
}

}  // namespace

TEST(Deconvolution, DeconvolvedEstimatorOnExactClicks) {
    // Exact for light supported on n <= bins.
    auto full = make_state(ThermalState{1.0}, 80);
    auto head = PhotonStatistics::from_weights(std::vector<double>(full.probs().begin(), full.probs().begin() + 9));
    auto truncated = moments_from_statistics(head, 4);
    auto rec = record_from_click_distribution(convolve_statistics(head, 8, 0.25));
    for (std::size_t m = 2; m <= 4; ++m) {
        EXPECT_NEAR(estimate_gm_deconvolved(rec, 0.25, m).value, truncated.g(m), 1e-8 * truncated.g(m)) << m;
    }
    // Support above n = 8 aliases into a small, order-dependent bias.
    auto rec_full = record_from_click_distribution(convolve_statistics(full, 8, 0.25));
    EXPECT_NEAR(estimate_gm_deconvolved(rec_full, 0.25, 2).value, 2.0, 1e-4);
    EXPECT_NEAR(estimate_gm_deconvolved(rec_full, 0.25, 4).value, 24.0, 24.0 * 2e-3);
}

TEST(Serialization, ClickRecordRoundTrips) {
    auto rec = simulate_network(make_state(ThermalState{0.5}, 40), NetworkSpec::balanced(1, click(0.8)), 5000, {4, 1});
    std::stringstream ss;
    write_click_record_csv(ss, rec);
    auto back = read_click_record_csv(ss);
    EXPECT_EQ(back.counts, rec.counts);
    EXPECT_EQ(back.trials, rec.trials);
    auto json = click_record_from_json(click_record_to_json(rec));
    EXPECT_EQ(json.counts, rec.counts);
    std::stringstream bad("# detectors=2 trials=5\npattern,count\n0,4\n");
    EXPECT_THROW(read_click_record_csv(bad), InvalidInput);
}

TEST(Serialization, NetworkSpecJson) {
    auto spec = network_spec_from_json(R"({"depth": 1, "transmissions": [[0.5], [0.4, 0.6]],
        "detectors": {"efficiency": 0.3, "dark_count": 1e-4}})");
    EXPECT_EQ(spec.outputs(), 4u);
    EXPECT_DOUBLE_EQ(spec.detectors[3].efficiency, 0.3);
    auto again = network_spec_from_json(network_spec_to_json(spec));
    EXPECT_EQ(again.transmissions, spec.transmissions);
    try {
        network_spec_from_json(R"({"depth": 0, "detectors": [{"efficiency": 1.2}, {}]})");
        FAIL();
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("detectors[0].efficiency"), std::string::npos) << e.what();
    }
    EXPECT_THROW(network_spec_from_json(R"({"depth": 0, "bogus": 1})"), InvalidInput);
    EXPECT_THROW(network_spec_from_json(R"({"depth": 0, "transmissions": [[1.0]]})"), InvalidInput);
}
