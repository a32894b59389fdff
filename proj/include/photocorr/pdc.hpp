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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "photocorr/detection.hpp"
#include "photocorr/fock.hpp"
#include "photocorr/moments.hpp"

namespace photocorr {

// Joint spectral amplitude ---------------------------------------------------

/// f(w_s, w_i) sampled on a rectangular uniform grid. Rows index the signal
/// frequency, columns the idler frequency (rad/s).
struct JointSpectralAmplitude {
    std::vector<double> signal_frequencies;
    std::vector<double> idler_frequencies;
    Eigen::MatrixXcd amplitude;

    /// Throws InvalidInput unless both axes have >= 2 strictly increasing,
    /// uniformly spaced (1e-6 relative) points matching the matrix shape and
    /// the amplitude is finite with nonzero norm.
    void validate() const;
};

/// Samples f on the tensor grid of the two axes.
template <typename F>
JointSpectralAmplitude sample_jsa(std::vector<double> signal, std::vector<double> idler, F&& f) {
    JointSpectralAmplitude jsa{std::move(signal), std::move(idler), {}};
    jsa.amplitude.resize(static_cast<Eigen::Index>(jsa.signal_frequencies.size()),
                         static_cast<Eigen::Index>(jsa.idler_frequencies.size()));
    for (Eigen::Index r = 0; r < jsa.amplitude.rows(); ++r)
        for (Eigen::Index c = 0; c < jsa.amplitude.cols(); ++c)
            jsa.amplitude(r, c) = f(jsa.signal_frequencies[static_cast<std::size_t>(r)],
                                    jsa.idler_frequencies[static_cast<std::size_t>(c)]);
    return jsa;
}

/// `count` evenly spaced points on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t count);

/// CSV with header "omega_s,omega_i,re,im" and one row per grid point in any
/// order; every grid point must appear exactly once.
JointSpectralAmplitude read_jsa_csv(std::istream& in);
void write_jsa_csv(std::ostream& out, const JointSpectralAmplitude& jsa);

// Schmidt spectrum -------------------------------------------------------------

struct SchmidtSpectrum {
    /// Retained weights lambda_q, descending, sum lambda_q^2 = 1.
    std::vector<double> weights;
    /// Squared-weight mass of the modes dropped by the rank cutoff.
    double residual = 0.0;
    /// Bound on |K(all modes) - K(retained)| implied by `residual`.
    double mode_number_error = 0.0;
    /// Relative change of K when the grid is halved in each direction
    /// (0 when the grid is too small to test).
    double resolution_drift = 0.0;

    /// Sorts, normalizes and validates (nonnegative, finite, not all zero).
    static SchmidtSpectrum from_weights(std::vector<double> weights);

    /// K = 1 / sum lambda_q^4.
    double effective_mode_number() const;
    double sum_power(int p) const;
};

struct SchmidtOptions {
    /// Modes with lambda < rank_cutoff * lambda_max are dropped.
    double rank_cutoff = 1e-8;
    /// ConvergenceError when the folded residual mass exceeds this.
    double max_residual = 1e-6;
    /// ConvergenceError when K moves by more than this (relative) between the
    /// grid and its every-other-point subgrid, i.e. the grid is too coarse.
    double max_resolution_drift = 1e-3;
    /// ConvergenceError when more than this fraction of |f|^2 sits on the
    /// grid boundary, i.e. the window truncates the amplitude.
    double max_edge_fraction = 1e-6;
};

/// Schmidt weights from the singular values of f * sqrt(dw_s dw_i).
SchmidtSpectrum schmidt_decompose(const JointSpectralAmplitude& jsa, const SchmidtOptions& options = {});

// Joint moments ----------------------------------------------------------------

/// g^(w,v) = <:n_s^w n_i^v:> / (<n_s>^w <n_i>^v) of a joint distribution.
/// Throws InvalidInput when w + v == 0 or an order exceeds the truncation,
/// and when a marginal mean vanishes.
double joint_normalized_moment(const JointPhotonStatistics& joint, std::size_t w, std::size_t v);

/// Strength B with sum_q sinh^2(B lambda_q) = mean (monotone bisection).
double strength_for_mean(const SchmidtSpectrum& spectrum, double mean);

/// Smallest power-of-two n_max (>= minimum) whose pair distribution meets
/// the tail tolerance; TruncationError past 1024.
JointPhotonStatistics twin_beam_joint(const SchmidtSpectrum& spectrum, double strength,
                                      std::size_t minimum_n_max = 8,
                                      double tail_tolerance = kDefaultTailTolerance);

struct JointMoment {
    /// From the truncated two-mode squeezed joint statistics.
    double exact = 0.0;
    /// Low-power closed form in terms of <n> and K, for (1,1), (2,0), (0,2),
    /// (2,1) and (1,2); empty for other orders.
    std::optional<double> closed_form;
    double mean_photon_number = 0.0;
    double strength = 0.0;
    std::size_t n_max = 0;
    double tail_bound = 0.0;
};

JointMoment joint_moment(const SchmidtSpectrum& spectrum, double strength, std::size_t w, std::size_t v,
                         double tail_tolerance = kDefaultTailTolerance);

/// Closed forms with 1/K and sum lambda^6 given explicitly (both 0 for the
/// infinitely multimode limit). Empty for unsupported orders.
std::optional<double> joint_moment_closed_form(std::size_t w, std::size_t v, double mean,
                                               double inverse_mode_number, double sum_lambda6);

// Heralding --------------------------------------------------------------------

struct HeraldSetup {
    /// Herald detector; `efficiency` is the Klyshko efficiency.
    DetectorModel detector;
    /// Photon number required from a PNR herald.
    std::size_t outcome = 1;

    /// Also rejects dark counts on a PNR herald (not modelled).
    void validate() const;
};

/// Probability that the herald fires given n idler photons.
double herald_povm(const HeraldSetup& setup, std::size_t n_idler);

/// Conditional signal statistics. Tail bound is the joint tail divided by
/// the success probability. Throws InvalidInput on zero success probability.
PhotonStatistics herald_state(const JointPhotonStatistics& joint, const HeraldSetup& setup,
                              double* success_probability = nullptr);

/// Pair source for heralding curves: a finite Schmidt spectrum, or the
/// infinitely multimode limit with Poissonian pair number.
class PairSource {
   public:
    static PairSource single_mode();
    static PairSource multimode_limit();
    static PairSource from_spectrum(SchmidtSpectrum spectrum);

    bool is_multimode_limit() const { return !spectrum_.has_value(); }
    double inverse_mode_number() const;
    std::string label() const;

    /// Exact g^(1,1) at mean photon number `mean`.
    double car(double mean) const;
    /// Joint statistics at mean photon number `mean`.
    JointPhotonStatistics joint(double mean, double tail_tolerance = kDefaultTailTolerance) const;
    /// Mean photon number whose exact g^(1,1) equals `car` (bisection on
    /// [1e-9, 20]). Throws InvalidInput when `car` is outside that range.
    double mean_for_car(double car) const;

   private:
    std::optional<SchmidtSpectrum> spectrum_;
};

struct HeraldPoint {
    double car = 0.0;
    double mean_photon_number = 0.0;
    double g2h = 0.0;
    double success_probability = 0.0;
};

/// Heralded g^(2) for each CAR value; points are evaluated in parallel.
std::vector<HeraldPoint> g2h_curve(const PairSource& source, const std::vector<double>& cars,
                                   const HeraldSetup& setup, unsigned threads = 0);

/// Header "car,mean_photon_number,g2h,success_probability".
void write_herald_curve_csv(std::ostream& out, const std::vector<HeraldPoint>& points);

// Nonclassicality --------------------------------------------------------------

/// g^(1,1) > sqrt(g^(2,0) g^(0,2)) (Cauchy-Schwarz for the P function).
/// Uncertainties are propagated to first order; zero means exact inputs.
NonclassicalityVerdict twin_beam_nonclassicality(double g11, double g20, double g02, double sigma11 = 0.0,
                                                 double sigma20 = 0.0, double sigma02 = 0.0);

}  // namespace photocorr
