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

// Truncated Fock-space numerics: photon-number distributions, displacement
// matrix elements and two-mode squeezed pair statistics.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace photocorr {

/// Default bound on the probability mass a constructor may drop above n_max.
inline constexpr double kDefaultTailTolerance = 1e-12;

/// Photon-number distribution rho_n for n = 0..n_max together with a
/// rigorous upper bound on the probability mass above n_max.
///
/// Entries are stored as computed; they are not renormalized to absorb the
/// tail, so sum() lies in [1 - tail_bound, 1].
class PhotonStatistics {
   public:
    /// Throws InvalidInput unless every entry is in [0, 1] and
    /// 1 - tail_bound - 1e-9 <= sum <= 1 + 1e-9.
    explicit PhotonStatistics(std::vector<double> probs, double tail_bound = 0.0);

    /// Renormalizes arbitrary nonnegative weights to a distribution with no tail.
    static PhotonStatistics from_weights(std::vector<double> weights);

    std::span<const double> probs() const { return probs_; }
    /// rho_n, or 0 for n > n_max.
    double operator[](std::size_t n) const { return n < probs_.size() ? probs_[n] : 0.0; }
    std::size_t n_max() const { return probs_.size() - 1; }
    double tail_bound() const { return tail_bound_; }
    double sum() const;
    double mean() const;

   private:
    std::vector<double> probs_;
    double tail_bound_;
};

/// Complex displacement alpha in the phase-space units where the vacuum
/// Wigner function is (2/pi) exp(-2|alpha|^2).
class DisplacementAmplitude {
   public:
    constexpr DisplacementAmplitude() = default;
    /// Throws InvalidInput for non-finite components.
    DisplacementAmplitude(double re, double im);
    static DisplacementAmplitude polar(double magnitude, double phase);

    double re() const { return re_; }
    double im() const { return im_; }
    std::complex<double> value() const { return {re_, im_}; }
    double norm() const { return re_ * re_ + im_ * im_; }  // |alpha|^2
    double magnitude() const;

   private:
    double re_ = 0.0;
    double im_ = 0.0;
};

/// Pure state sum_n amp_n |n> on a truncated space.
class FockAmplitudeVector {
   public:
    /// Throws InvalidInput unless 1 - tail_bound - 1e-9 <= sum |amp|^2 <= 1 + 1e-9.
    explicit FockAmplitudeVector(std::vector<std::complex<double>> amps, double tail_bound = 0.0);

    static FockAmplitudeVector fock(std::size_t k);

    std::span<const std::complex<double>> amps() const { return amps_; }
    std::size_t n_max() const { return amps_.size() - 1; }
    double tail_bound() const { return tail_bound_; }
    PhotonStatistics statistics() const;

   private:
    std::vector<std::complex<double>> amps_;
    double tail_bound_;
};

/// Joint signal/idler photon-number distribution p(n_s, n_i).
class JointPhotonStatistics {
   public:
    /// Throws InvalidInput on negative entries or total mass outside
    /// [1 - tail_bound - 1e-9, 1 + 1e-9].
    JointPhotonStatistics(Eigen::MatrixXd probs, double tail_bound = 0.0);

    /// Strictly correlated state: p(n, n) = pairs[n], zero elsewhere.
    static JointPhotonStatistics diagonal(const PhotonStatistics& pairs);

    const Eigen::MatrixXd& probs() const { return probs_; }
    double operator()(std::size_t n_s, std::size_t n_i) const { return probs_(n_s, n_i); }
    std::size_t n_max_signal() const { return static_cast<std::size_t>(probs_.rows()) - 1; }
    std::size_t n_max_idler() const { return static_cast<std::size_t>(probs_.cols()) - 1; }
    double tail_bound() const { return tail_bound_; }

    PhotonStatistics signal_marginal() const;
    PhotonStatistics idler_marginal() const;

   private:
    Eigen::MatrixXd probs_;
    double tail_bound_;
};

// State catalog ------------------------------------------------------------

struct FockState {
    std::size_t k = 0;
};
struct PoissonState {
    double mean = 0.0;
};
struct ThermalState {
    double mean = 0.0;
};
struct DisplacedFockState {
    std::size_t k = 0;
    DisplacementAmplitude alpha;
};
using StateSpec = std::variant<FockState, PoissonState, ThermalState, DisplacedFockState>;

/// Builds the photon statistics of a catalog state truncated at n_max.
///
/// The tail bound is exact for thermal light (x^(n_max+1)), a Chernoff bound
/// for Poisson light and the unitarity deficit of the displacement column for
/// displaced Fock states. Throws TruncationError if it exceeds
/// `tail_tolerance`, InvalidInput for a negative mean.
PhotonStatistics make_state(const StateSpec& spec, std::size_t n_max,
                            double tail_tolerance = kDefaultTailTolerance);

/// Smallest n_max for which make_state meets `tail_tolerance` (searches up to
/// `limit`, then throws TruncationError).
std::size_t required_n_max(const StateSpec& spec, double tail_tolerance = kDefaultTailTolerance,
                           std::size_t limit = 2000);

// Displacement operator ----------------------------------------------------

/// <m|D(alpha)|n> from the associated-Laguerre closed form, evaluated with
/// log-factorial prefactors so it stays finite for m, n up to several hundred.
std::complex<double> displacement_element(std::size_t m, std::size_t n,
                                          const DisplacementAmplitude& alpha);

/// Matrix of <m|D(alpha)|n> for m, n = 0..n_max. Every element is the exact
/// infinite-space value; truncation only shows up as a unitarity deficit in
/// columns near n_max.
Eigen::MatrixXcd displacement_matrix(const DisplacementAmplitude& alpha, std::size_t n_max);

/// D(alpha)|k> truncated at n_max; tail bound is the column's unitarity deficit.
FockAmplitudeVector displaced_fock_amplitudes(std::size_t k, const DisplacementAmplitude& alpha,
                                              std::size_t n_max);

// Two-mode squeezing ---------------------------------------------------------

/// Mean photon number per beam, sum_q sinh^2(strength * lambda_q).
double twin_beam_mean_photon_number(std::span<const double> mode_weights, double strength);

/// Distribution of the total pair number of exp(sum_q r_q A_q B_q - h.c.)|0>
/// with r_q = strength * lambda_q: per-mode geometric pair distributions with
/// ratio tanh^2(r_q), convolved over modes.
PhotonStatistics pair_number_distribution(std::span<const double> mode_weights, double strength,
                                          std::size_t n_max,
                                          double tail_tolerance = kDefaultTailTolerance);

/// Joint signal/idler statistics of the same state. Throws InvalidInput when
/// sum lambda_q^2 differs from 1 by more than 1e-9 or strength < 0, and
/// TruncationError when the dropped pair mass exceeds `tail_tolerance`.
JointPhotonStatistics two_mode_squeezed_joint(std::span<const double> mode_weights,
                                              double strength, std::size_t n_max,
                                              double tail_tolerance = kDefaultTailTolerance);

// Oracle -------------------------------------------------------------------

/// <:N^m:> = sum_n n!/(n-m)! rho_n by direct falling-factorial products.
/// Deliberately naive: every other module checks its factorial moments
/// against this. Throws InvalidInput for m == 0 or m > n_max.
double normal_ordered_moment_oracle(const PhotonStatistics& stats, std::size_t m);

}  // namespace photocorr
