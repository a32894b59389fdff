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

#include "photocorr/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "photocorr/error.hpp"
#include "photocorr/format.hpp"

namespace photocorr {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kMassSlack = 1e-9;
constexpr std::size_t kMaxDisplacementDim = 400;

// Rounding allowance for a mass computed as 1 - (sum of n positive terms).
double rounding_allowance(std::size_t terms) { return 4.0 * static_cast<double>(terms + 1) * kEps; }

void check_mass(double total, double tail_bound, const char* what) {
    if (!(total <= 1.0 + kMassSlack) || !(total >= 1.0 - tail_bound - kMassSlack)) {
        throw InvalidInput(std::string(what) + ": total probability " + format_double(total) +
                           " inconsistent with tail bound " + format_double(tail_bound));
    }
}

// L_0..L_count-1 of the associated Laguerre polynomials L_k^(a)(x).
std::vector<double> laguerre_sequence(std::size_t count, double a, double x) {
    std::vector<double> out(count);
    if (count == 0) return out;
    out[0] = 1.0;
    if (count == 1) return out;
    out[1] = 1.0 + a - x;
    for (std::size_t k = 1; k + 1 < count; ++k) {
        const double kd = static_cast<double>(k);
        out[k + 1] = ((2.0 * kd + 1.0 + a - x) * out[k] - (kd + a) * out[k - 1]) / (kd + 1.0);
    }
    return out;
}

double log_factorial(std::size_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// <lo + d| D |lo> style element: for row index `big` and column `small`
// (big >= small), returns |prefactor| * L_small^(d)(|alpha|^2) without phase.
double displacement_magnitude_part(std::size_t big, std::size_t small, double log_abs_alpha,
                                   double abs2, double laguerre) {
    const std::size_t d = big - small;
    const double log_pref = 0.5 * (log_factorial(small) - log_factorial(big)) - 0.5 * abs2 +
                            static_cast<double>(d) * log_abs_alpha;
    return std::exp(log_pref) * laguerre;
}

void check_displacement_dim(std::size_t n_max) {
    if (n_max > kMaxDisplacementDim) {
        throw InvalidInput("displacement truncation n_max=" + std::to_string(n_max) +
                           " exceeds supported maximum " + std::to_string(kMaxDisplacementDim));
    }
}

double poisson_log_tail_bound(double mean, std::size_t n_max) {
    // Chernoff: P(X >= t) <= exp(-mean) (e mean / t)^t for t > mean.
    const double t = static_cast<double>(n_max) + 1.0;
    if (mean == 0.0) return -std::numeric_limits<double>::infinity();
    if (t <= mean) return 0.0;
    return -mean + t * (1.0 + std::log(mean) - std::log(t));
}

}  // namespace

// PhotonStatistics ---------------------------------------------------------

PhotonStatistics::PhotonStatistics(std::vector<double> probs, double tail_bound)
    : probs_(std::move(probs)), tail_bound_(tail_bound) {
    if (probs_.empty()) throw InvalidInput("photon statistics need at least the n = 0 entry");
    if (!(tail_bound_ >= 0.0 && tail_bound_ <= 1.0)) {
        throw InvalidInput("tail bound must lie in [0, 1]");
    }
    for (std::size_t n = 0; n < probs_.size(); ++n) {
        const double p = probs_[n];
        if (!(p >= 0.0 && p <= 1.0 + kMassSlack)) {
            throw InvalidInput("probability at n=" + std::to_string(n) + " outside [0, 1]: " +
                               format_double(p));
        }
    }
    check_mass(sum(), tail_bound_, "photon statistics");
}

PhotonStatistics PhotonStatistics::from_weights(std::vector<double> weights) {
    if (weights.empty()) throw InvalidInput("empty weight vector");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidInput("weights must be finite and nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidInput("weights sum to zero");
    for (double& w : weights) w /= total;
    return PhotonStatistics(std::move(weights), 0.0);
}

double PhotonStatistics::sum() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

double PhotonStatistics::mean() const {
    double m = 0.0;
    for (std::size_t n = 1; n < probs_.size(); ++n) m += static_cast<double>(n) * probs_[n];
    return m;
}

// DisplacementAmplitude ----------------------------------------------------

DisplacementAmplitude::DisplacementAmplitude(double re, double im) : re_(re), im_(im) {
    if (!std::isfinite(re) || !std::isfinite(im)) throw InvalidInput("displacement must be finite");
}

DisplacementAmplitude DisplacementAmplitude::polar(double magnitude, double phase) {
    return {magnitude * std::cos(phase), magnitude * std::sin(phase)};
}

double DisplacementAmplitude::magnitude() const { return std::hypot(re_, im_); }

// FockAmplitudeVector ------------------------------------------------------

FockAmplitudeVector::FockAmplitudeVector(std::vector<std::complex<double>> amps, double tail_bound)
    : amps_(std::move(amps)), tail_bound_(tail_bound) {
    if (amps_.empty()) throw InvalidInput("amplitude vector needs at least the n = 0 entry");
    if (!(tail_bound_ >= 0.0 && tail_bound_ <= 1.0)) throw InvalidInput("tail bound must lie in [0, 1]");
    double total = 0.0;
    for (const auto& a : amps_) {
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) throw InvalidInput("non-finite amplitude");
        total += std::norm(a);
    }
    check_mass(total, tail_bound_, "amplitude vector");
}

FockAmplitudeVector FockAmplitudeVector::fock(std::size_t k) {
    std::vector<std::complex<double>> amps(k + 1);
    amps[k] = 1.0;
    return FockAmplitudeVector(std::move(amps), 0.0);
}

PhotonStatistics FockAmplitudeVector::statistics() const {
    std::vector<double> probs(amps_.size());
    for (std::size_t n = 0; n < amps_.size(); ++n) probs[n] = std::min(1.0, std::norm(amps_[n]));
    return PhotonStatistics(std::move(probs), tail_bound_);
}

// JointPhotonStatistics ----------------------------------------------------

JointPhotonStatistics::JointPhotonStatistics(Eigen::MatrixXd probs, double tail_bound)
    : probs_(std::move(probs)), tail_bound_(tail_bound) {
    if (probs_.size() == 0) throw InvalidInput("joint statistics must be nonempty");
    if (!(tail_bound_ >= 0.0 && tail_bound_ <= 1.0)) throw InvalidInput("tail bound must lie in [0, 1]");
    if (!(probs_.minCoeff() >= 0.0) || !probs_.allFinite()) {
        throw InvalidInput("joint probabilities must be finite and nonnegative");
    }
    check_mass(probs_.sum(), tail_bound_, "joint statistics");
}

JointPhotonStatistics JointPhotonStatistics::diagonal(const PhotonStatistics& pairs) {
    const auto dim = static_cast<Eigen::Index>(pairs.n_max() + 1);
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index n = 0; n < dim; ++n) probs(n, n) = pairs[static_cast<std::size_t>(n)];
    return JointPhotonStatistics(std::move(probs), pairs.tail_bound());
}

PhotonStatistics JointPhotonStatistics::signal_marginal() const {
    Eigen::VectorXd rows = probs_.rowwise().sum();
    std::vector<double> out(rows.data(), rows.data() + rows.size());
    for (double& p : out) p = std::min(p, 1.0);
    return PhotonStatistics(std::move(out), tail_bound_);
}

PhotonStatistics JointPhotonStatistics::idler_marginal() const {
    Eigen::RowVectorXd cols = probs_.colwise().sum();
    std::vector<double> out(cols.data(), cols.data() + cols.size());
    for (double& p : out) p = std::min(p, 1.0);
    return PhotonStatistics(std::move(out), tail_bound_);
}

// Displacement ---------------------------------------------------------------

std::complex<double> displacement_element(std::size_t m, std::size_t n,
                                          const DisplacementAmplitude& alpha) {
    check_displacement_dim(std::max(m, n));
    const double abs2 = alpha.norm();
    if (abs2 == 0.0) return m == n ? 1.0 : 0.0;
    const double log_abs = 0.5 * std::log(abs2);
    const double phase = std::atan2(alpha.im(), alpha.re());
    const std::size_t big = std::max(m, n);
    const std::size_t small = std::min(m, n);
    const std::size_t d = big - small;
    const double laguerre = laguerre_sequence(small + 1, static_cast<double>(d), abs2)[small];
    const double magnitude = displacement_magnitude_part(big, small, log_abs, abs2, laguerre);
    // m >= n: alpha^d; m < n: (-alpha*)^d.
    const double dd = static_cast<double>(d);
    if (m >= n) return std::polar(magnitude, dd * phase);
    const double sign = (d % 2 == 0) ? 1.0 : -1.0;
    return std::polar(sign * magnitude, -dd * phase);
}

Eigen::MatrixXcd displacement_matrix(const DisplacementAmplitude& alpha, std::size_t n_max) {
    check_displacement_dim(n_max);
    const auto dim = static_cast<Eigen::Index>(n_max + 1);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    const double abs2 = alpha.norm();
    if (abs2 == 0.0) {
        out.setIdentity();
        return out;
    }
    const double log_abs = 0.5 * std::log(abs2);
    const double phase = std::atan2(alpha.im(), alpha.re());
    // One Laguerre recurrence per diagonal offset d fills both (n + d, n) and (n, n + d).
    for (std::size_t d = 0; d <= n_max; ++d) {
        const std::size_t len = n_max + 1 - d;
        const auto lag = laguerre_sequence(len, static_cast<double>(d), abs2);
        const double dd = static_cast<double>(d);
        const double sign = (d % 2 == 0) ? 1.0 : -1.0;
        for (std::size_t small = 0; small < len; ++small) {
            const std::size_t big = small + d;
            const double magnitude = displacement_magnitude_part(big, small, log_abs, abs2, lag[small]);
            const auto b = static_cast<Eigen::Index>(big);
            const auto s = static_cast<Eigen::Index>(small);
            out(b, s) = std::polar(magnitude, dd * phase);
            if (d != 0) out(s, b) = std::polar(sign * magnitude, -dd * phase);
        }
    }
    return out;
}

FockAmplitudeVector displaced_fock_amplitudes(std::size_t k, const DisplacementAmplitude& alpha,
                                              std::size_t n_max) {
    check_displacement_dim(std::max(n_max, k));
    std::vector<std::complex<double>> amps(n_max + 1);
    double total = 0.0;
    for (std::size_t m = 0; m <= n_max; ++m) {
        amps[m] = displacement_element(m, k, alpha);
        total += std::norm(amps[m]);
    }
    const double tail = std::clamp(1.0 - total, 0.0, 1.0) + rounding_allowance(n_max);
    return FockAmplitudeVector(std::move(amps), std::min(tail, 1.0));
}

// Catalog --------------------------------------------------------------------

namespace {

struct Truncated {
    std::vector<double> probs;
    double tail;
};

Truncated build_catalog(const StateSpec& spec, std::size_t n_max) {
    return std::visit(
        [n_max](const auto& s) -> Truncated {
            using T = std::decay_t<decltype(s)>;
            std::vector<double> probs(n_max + 1, 0.0);
            if constexpr (std::is_same_v<T, FockState>) {
                if (s.k > n_max) return {std::move(probs), 1.0};
                probs[s.k] = 1.0;
                return {std::move(probs), 0.0};
            } else if constexpr (std::is_same_v<T, PoissonState>) {
                if (!(s.mean >= 0.0) || !std::isfinite(s.mean)) {
                    throw InvalidInput("mean photon number must be finite and nonnegative");
                }
                if (s.mean == 0.0) {
                    probs[0] = 1.0;
                    return {std::move(probs), 0.0};
                }
                const double log_mean = std::log(s.mean);
                for (std::size_t n = 0; n <= n_max; ++n) {
                    probs[n] = std::exp(-s.mean + static_cast<double>(n) * log_mean - log_factorial(n));
                }
                const double log_tail = poisson_log_tail_bound(s.mean, n_max);
                return {std::move(probs), std::min(1.0, std::exp(log_tail))};
            } else if constexpr (std::is_same_v<T, ThermalState>) {
                if (!(s.mean >= 0.0) || !std::isfinite(s.mean)) {
                    throw InvalidInput("mean photon number must be finite and nonnegative");
                }
                const double x = s.mean / (1.0 + s.mean);
                double power = 1.0;
                for (std::size_t n = 0; n <= n_max; ++n) {
                    probs[n] = power * (1.0 - x);
                    power *= x;
                }
                return {std::move(probs), power};  // x^(n_max+1), exact
            } else {
                if (s.k > kMaxDisplacementDim || n_max > kMaxDisplacementDim) {
                    return {std::move(probs), 1.0};
                }
                auto amps = displaced_fock_amplitudes(s.k, s.alpha, n_max);
                for (std::size_t n = 0; n <= n_max; ++n) probs[n] = std::min(1.0, std::norm(amps.amps()[n]));
                return {std::move(probs), amps.tail_bound()};
            }
        },
        spec);
}

}  // namespace

PhotonStatistics make_state(const StateSpec& spec, std::size_t n_max, double tail_tolerance) {
    auto built = build_catalog(spec, n_max);
    if (built.tail > tail_tolerance) {
        throw TruncationError("n_max=" + std::to_string(n_max) + " leaves tail mass bound " +
                              format_double(built.tail) + " above tolerance " +
                              format_double(tail_tolerance));
    }
    return PhotonStatistics(std::move(built.probs), built.tail);
}

std::size_t required_n_max(const StateSpec& spec, double tail_tolerance, std::size_t limit) {
    // Exponential search then bisection; every catalog tail bound is
    // nonincreasing in n_max.
    auto ok = [&](std::size_t n) { return build_catalog(spec, n).tail <= tail_tolerance; };
    std::size_t hi = 1;
    while (!ok(hi)) {
        if (hi >= limit) throw TruncationError("no truncation up to " + std::to_string(limit) + " meets tolerance");
        hi = std::min(limit, hi * 2);
    }
    std::size_t lo = 0;
    if (ok(0)) return 0;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

// Two-mode squeezing -----------------------------------------------------------

namespace {

void check_weights(std::span<const double> weights, double strength) {
    if (weights.empty()) throw InvalidInput("at least one mode weight is required");
    if (!(strength >= 0.0) || !std::isfinite(strength)) throw InvalidInput("process strength must be >= 0");
    double norm = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w)) throw InvalidInput("mode weights must be finite");
        norm += w * w;
    }
    if (std::abs(norm - 1.0) > 1e-9) {
        throw InvalidInput("mode weights must satisfy sum lambda^2 = 1, got " + std::to_string(norm));
    }
}

// P(total pairs > n_max) <= E[z^n] / z^(n_max+1) for 1 < z < 1/max(x_q), with
// E[z^n] = prod (1 - x_q) / (1 - z x_q). Free of the cancellation in 1 - sum,
// which matters once hundreds of modes are convolved.
double pair_chernoff_bound(std::span<const double> weights, double strength, std::size_t n_max) {
    double x_max = 0.0;
    for (double w : weights) {
        const double t = std::tanh(strength * std::abs(w));
        x_max = std::max(x_max, t * t);
    }
    if (x_max == 0.0) return 0.0;
    if (x_max >= 1.0) return 1.0;
    auto log_bound = [&](double log_z) {
        const double z = std::exp(log_z);
        double acc = -static_cast<double>(n_max + 1) * log_z;
        for (double w : weights) {
            const double t = std::tanh(strength * std::abs(w));
            const double x = t * t;
            acc += std::log1p(-x) - std::log1p(-z * x);
        }
        return acc;
    };
    // Convex in log z; golden-section search on (0, -ln x_max).
    double lo = 0.0;
    double hi = -std::log(x_max) * (1.0 - 1e-12);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - phi * (hi - lo);
    double b = lo + phi * (hi - lo);
    double fa = log_bound(a);
    double fb = log_bound(b);
    for (int it = 0; it < 200; ++it) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = log_bound(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = log_bound(b);
        }
    }
    // Relative rounding in the log-sum is tiny; pad by a few ulps per mode.
    const double pad = 8.0 * kEps * static_cast<double>(weights.size() + n_max + 1);
    return std::min(1.0, std::exp(std::min(fa, fb) + pad));
}

}  // namespace

double twin_beam_mean_photon_number(std::span<const double> mode_weights, double strength) {
    check_weights(mode_weights, strength);
    double total = 0.0;
    for (double w : mode_weights) {
        const double s = std::sinh(strength * w);
        total += s * s;
    }
    return total;
}

PhotonStatistics pair_number_distribution(std::span<const double> mode_weights, double strength,
                                          std::size_t n_max, double tail_tolerance) {
    check_weights(mode_weights, strength);
    std::vector<double> dist(n_max + 1, 0.0);
    dist[0] = 1.0;
    std::vector<double> next(n_max + 1);
    std::vector<double> mode(n_max + 1);
    for (double w : mode_weights) {
        const double t = std::tanh(strength * std::abs(w));
        const double x = t * t;
        if (x == 0.0) continue;
        double power = 1.0 - x;
        for (std::size_t k = 0; k <= n_max; ++k) {
            mode[k] = power;
            power *= x;
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t a = 0; a <= n_max; ++a) {
            if (dist[a] == 0.0) continue;
            for (std::size_t b = 0; a + b <= n_max; ++b) next[a + b] += dist[a] * mode[b];
        }
        dist.swap(next);
    }
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    const double deficit = std::clamp(1.0 - total, 0.0, 1.0) + rounding_allowance(n_max);
    const double tail = std::min(deficit, pair_chernoff_bound(mode_weights, strength, n_max));
    if (tail > tail_tolerance) {
        throw TruncationError("pair-number truncation n_max=" + std::to_string(n_max) +
                              " leaves tail mass " + format_double(tail) + " above tolerance " +
                              format_double(tail_tolerance));
    }
    return PhotonStatistics(std::move(dist), std::min(tail, 1.0));
}

JointPhotonStatistics two_mode_squeezed_joint(std::span<const double> mode_weights, double strength,
                                              std::size_t n_max, double tail_tolerance) {
    return JointPhotonStatistics::diagonal(
        pair_number_distribution(mode_weights, strength, n_max, tail_tolerance));
}

// Oracle -------------------------------------------------------------------------

double normal_ordered_moment_oracle(const PhotonStatistics& stats, std::size_t m) {
    if (m == 0) throw InvalidInput("moment order must be >= 1");
    if (m > stats.n_max()) {
        throw InvalidInput("moment order " + std::to_string(m) + " exceeds truncation n_max=" +
                           std::to_string(stats.n_max()));
    }
    double total = 0.0;
    for (std::size_t n = m; n <= stats.n_max(); ++n) {
        double falling = 1.0;
        for (std::size_t j = 0; j < m; ++j) falling *= static_cast<double>(n - j);
        total += falling * stats[n];
    }
    return total;
}

}  // namespace photocorr
