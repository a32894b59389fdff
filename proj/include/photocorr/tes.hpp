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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "photocorr/fock.hpp"
#include "photocorr/moments.hpp"

namespace photocorr {

// Traces -------------------------------------------------------------------------

/// Fixed-length detector traces stored row-major as float (the binary
/// container's sample type, so both file formats round-trip bit-exactly).
struct TesTraceSet {
    double sample_rate = 0.0;  // samples per second
    std::size_t trace_length = 0;
    std::vector<float> samples;
    std::string label;

    std::size_t size() const { return trace_length == 0 ? 0 : samples.size() / trace_length; }
    std::span<const float> trace(std::size_t i) const {
        return {samples.data() + i * trace_length, trace_length};
    }
    /// Throws InvalidInput unless sample_rate > 0, trace_length > 0 and the
    /// sample count is a multiple of trace_length.
    void validate() const;
};

/// "# sample_rate=<r> label=<text>" then one comma-separated trace per row.
void write_traces_csv(std::ostream& out, const TesTraceSet& traces);
TesTraceSet read_traces_csv(std::istream& in);

/// Little-endian {"TES1", u32 trace_count, u32 trace_length, f64 sample_rate}
/// followed by f32 samples, row-major. The label is not stored.
void write_traces_binary(std::ostream& out, const TesTraceSet& traces);
TesTraceSet read_traces_binary(std::istream& in);

/// Single-photon response: zero before `onset`, then
/// exp(-t/decay) - exp(-t/rise), scaled so the whole pulse sums to `area`.
struct PulseTemplate {
    std::size_t length = 256;
    std::size_t onset = 64;
    double rise = 2.0;    // samples
    double decay = 20.0;  // samples
    double area = 1.0;

    std::vector<double> shape() const;
};

struct IntegrationWindow {
    std::size_t start = 56;
    std::size_t end = 256;  // exclusive
};

/// White-noise sigma that gives the requested FWHM / single-photon-area ratio
/// for areas integrated over `window` with pre-window baseline subtraction.
double noise_sigma_for_resolution(const PulseTemplate& pulse, const IntegrationWindow& window, double ratio);

struct SynthesisOptions {
    double noise_sigma = 0.0;
    /// Relative Gaussian spread of each photon's pulse height.
    double gain_jitter = 0.0;
    double sample_rate = 77.5e3;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

inline constexpr std::size_t kTracesPerChunk = 4096;

/// Draws n per trace from `stats` and emits n photons' pulses plus white noise.
/// Chunk c of kTracesPerChunk traces uses Rng(seed, c).
TesTraceSet synthesize_traces(const PhotonStatistics& stats, const PulseTemplate& pulse, std::size_t count,
                              const SynthesisOptions& options);

/// Sum of samples in [start, end) minus (end - start) times the mean of the
/// samples before `start` (no baseline correction when start == 0).
std::vector<double> integrate_areas(const TesTraceSet& traces, const IntegrationWindow& window,
                                    unsigned threads = 0);

// Histogram and mixture fit ------------------------------------------------------------

struct AreaHistogram {
    std::vector<double> edges;  // size bins + 1
    std::vector<double> counts;

    std::size_t bins() const { return counts.size(); }
    double total() const;
    void validate() const;
};

/// Uniform bins over [min, max]; width from Freedman-Diaconis unless given.
AreaHistogram make_histogram(std::span<const double> areas, std::optional<double> bin_width = std::nullopt);

struct MixturePeak {
    double gamma = 0.0;  // height, counts per unit area
    double alpha = 0.0;  // 1 / (2 sigma^2)
    double beta = 0.0;   // center
    double events = 0.0;  // gamma * sqrt(pi / alpha)
    /// Center and width fitted individually (otherwise from the shared
    /// spacing/width law of the first stage).
    bool free_shape = false;
};

struct MixtureFit {
    std::vector<MixturePeak> peaks;
    /// Covariance of the peak event counts.
    Eigen::MatrixXd events_covariance;
    /// Poisson deviance per degree of freedom.
    double residual = 0.0;
    std::size_t iterations = 0;
    /// FWHM of the single-photon peak over the 0 -> 1 peak spacing.
    std::optional<double> energy_resolution;
};

struct FitOptions {
    std::size_t max_iterations = 500;
    double tolerance = 1e-10;  // relative deviance change
    /// Peaks with at least this many fitted events get their own center and
    /// width in the second stage.
    double min_free_events = 1000.0;
};

/// Poisson-likelihood Levenberg-Marquardt fit of bin-integrated
/// sum_n gamma_n exp(-alpha_n (A - beta_n)^2), n = 0..n_peaks-1.
/// ConvergenceError on hitting the iteration cap or when fitted centers are
/// not strictly increasing (overlapping peaks).
MixtureFit fit_mixture(const AreaHistogram& hist, std::size_t n_peaks, const FitOptions& options = {});

struct StatisticsWithErrors {
    PhotonStatistics statistics;
    std::vector<double> sigma;
};

/// rho_n = A_n / sum A_n with errors from the fit covariance.
StatisticsWithErrors extract_statistics(const MixtureFit& fit);

inline constexpr std::size_t kTrialsPerMcChunk = 1024;

/// Monte-Carlo propagation: each trial perturbs every rho_n by its Gaussian
/// error, clips at 0, renormalizes and evaluates g^(m). Reports the ensemble
/// mean and standard deviation. Trials with zero mean are discarded;
/// NumericalError when more than 1% are.
MomentReport moments_with_mc_errors(const StatisticsWithErrors& stats, std::size_t m_max, std::size_t trials,
                                    std::uint64_t seed, unsigned threads = 0);

}  // namespace photocorr
