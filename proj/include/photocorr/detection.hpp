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

// Monte-Carlo simulation of beam-splitter networks with lossy click
// detectors, coincidence estimators of g^(m), and the click-counting
// convolution matrix with its least-squares inversion.

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "photocorr/fock.hpp"

namespace photocorr {

enum class DetectorKind { kClick, kPnr };

struct DetectorModel {
    DetectorKind kind = DetectorKind::kClick;
    double efficiency = 1.0;
    /// Probability of a spurious click per window, independent of light.
    double dark_count = 0.0;

    /// Throws InvalidInput unless efficiency in [0, 1] and dark_count in [0, 1).
    void validate() const;
};

/// Binary tree of beam splitters. Stage s = 0..depth holds 2^s splitters;
/// splitter (s, l) sends transmitted light to branch 2l and reflected light
/// to 2l + 1 of stage s + 1, so the last stage feeds 2^(depth+1) detectors.
/// depth = 0 is the two-detector HBT arrangement.
struct NetworkSpec {
    std::size_t depth = 0;
    std::vector<std::vector<double>> transmissions;
    std::vector<DetectorModel> detectors;

    static constexpr std::size_t kMaxOutputs = 16;

    static NetworkSpec balanced(std::size_t depth, const DetectorModel& detector);
    static NetworkSpec hbt(double transmission, const DetectorModel& d1, const DetectorModel& d2);

    std::size_t outputs() const { return std::size_t{2} << depth; }
    /// Probability that one photon reaches each output (before detection).
    std::vector<double> path_probabilities() const;
    /// Throws InvalidInput on shape mismatch, transmissions outside (0, 1),
    /// more than kMaxOutputs outputs or non-click detectors.
    void validate() const;
};

/// Histogram over click patterns; bit o of the pattern index is set when
/// detector o clicked.
struct ClickRecord {
    std::size_t detectors = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t trials = 0;

    /// Throws InvalidInput unless counts has 2^detectors entries summing to trials.
    void validate() const;
    /// Distribution of the number of clicking detectors, k = 0..detectors.
    std::vector<double> click_number_distribution() const;
    double marginal(std::size_t detector) const;
};

struct CountEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
    /// Coincidence events entering the numerator.
    std::uint64_t events = 0;
};

struct SimulationOptions {
    std::uint64_t seed = 0;
    /// 0 selects default_thread_count().
    unsigned threads = 0;
};

/// Trials per independently seeded chunk. Results depend on (seed, trials)
/// only, never on the worker count.
inline constexpr std::uint64_t kTrialsPerChunk = std::uint64_t{1} << 18;

/// Per trial: draw n from `input`, route every photon to an output with the
/// path probabilities, keep it with that detector's efficiency, OR in dark
/// counts and record the pattern. Throws InvalidInput for trials == 0.
ClickRecord simulate_network(const PhotonStatistics& input, const NetworkSpec& spec,
                             std::uint64_t trials, const SimulationOptions& options);

/// g^(2) ~ P_c / (P_1 P_2) for a two-detector record.
CountEstimate estimate_g2_hbt(const ClickRecord& record);

/// P(all of `chosen` click) / prod P(o clicks), with a delta-method standard
/// error. Throws InvalidInput for repeated/out-of-range detectors or a zero
/// marginal.
CountEstimate estimate_gm_mfold(const ClickRecord& record, const std::vector<std::size_t>& chosen);

/// The same ratio pooled over every m-subset of detectors:
/// E[C(k, m)] / e_m(P_1..P_D), where k counts clicks in a window and e_m is
/// the elementary symmetric polynomial of the marginals.
CountEstimate estimate_gm_pooled(const ClickRecord& record, std::size_t m);

/// C[k, n]: probability that n photons, each kept with probability eta and
/// spread uniformly over `bins` click detectors, light exactly k of them.
/// Shape (bins + 1) x (n_max + 1).
Eigen::MatrixXd convolution_matrix(std::size_t bins, double efficiency, std::size_t n_max);

/// Click-number distribution produced by `input` (all of its n_max).
std::vector<double> convolve_statistics(const PhotonStatistics& input, std::size_t bins, double efficiency);

struct DeconvolutionOptions {
    double max_condition = 1e12;
    /// Euclidean residual ||C x - c|| above which the result is rejected.
    double max_residual = 1e-2;
};

struct DeconvolutionResult {
    PhotonStatistics statistics{std::vector<double>{1.0}};
    /// Least-squares solution before clipping negative entries.
    std::vector<double> raw_solution;
    double residual = 0.0;
    double condition_number = 0.0;
    /// Total |negative mass| removed by clipping.
    double clipped_mass = 0.0;
};

/// Solves C x = clicks in the least-squares sense (SVD), clips negative
/// entries and renormalizes. Throws IllConditionedError when the condition
/// number exceeds the option, ConvergenceError when the residual does, and
/// InvalidInput for efficiency <= 0 or a click vector of the wrong length.
DeconvolutionResult deconvolve_statistics(const std::vector<double>& clicks, std::size_t bins,
                                          double efficiency, std::size_t n_max,
                                          const DeconvolutionOptions& options = {});

/// g^(m) of the photon statistics behind a sampled click-number distribution
/// of `record`, read off the unclipped least-squares inversion with
/// n_max = bins. The estimate is linear in the click distribution, so no
/// clipping bias enters; it is exact for light without support above
/// n = bins, and photon numbers beyond that alias into a small bias that
/// grows with m (about 1e-5 for g^(2), 1e-3 for g^(4) of thermal light with
/// <n> = 1 through 8 bins at eta = 0.25). The standard error is
/// the delta method over the multinomial click counts. Assumes balanced
/// splitting and the same efficiency at every detector.
CountEstimate estimate_gm_deconvolved(const ClickRecord& record, double efficiency, std::size_t m);

/// The naive alternative: the click number k treated as if it were the
/// photon number, <k(k-1)...(k-m+1)> / <k>^m. Biased by detector saturation.
CountEstimate estimate_gm_raw_clicks(const ClickRecord& record, std::size_t m);

// Serialization ----------------------------------------------------------------

/// CSV "pattern,count" rows preceded by "# detectors=D trials=T".
void write_click_record_csv(std::ostream& out, const ClickRecord& record);
ClickRecord read_click_record_csv(std::istream& in);
std::string click_record_to_json(const ClickRecord& record);
ClickRecord click_record_from_json(const std::string& text);

/// {"depth": M, "transmissions": [[...], ...], "detectors": [{"kind": "click",
/// "efficiency": .., "dark_count": ..}, ...]}; a single detector object is
/// broadcast to every output. Unknown keys are rejected.
NetworkSpec network_spec_from_json(const std::string& text);
std::string network_spec_to_json(const NetworkSpec& spec);

}  // namespace photocorr
