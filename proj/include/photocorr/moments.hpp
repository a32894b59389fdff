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

// Normalized factorial moments, the moment generating function and the
// moment-based nonclassicality criteria.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "photocorr/fock.hpp"

namespace photocorr {

enum class MomentSource { kAnalytic, kMonteCarlo, kMeasured };

const char* to_string(MomentSource source);

/// g^(m) for m = 0..m_max with one standard deviation per order.
///
/// Index 0 and 1 are fixed to 1 (normalization); their uncertainties are 0.
struct MomentReport {
    std::vector<double> values;
    std::vector<double> uncertainties;
    double mean_photon_number = 0.0;
    double mean_uncertainty = 0.0;
    MomentSource source = MomentSource::kAnalytic;

    /// Validating constructor. `values` and `uncertainties` (empty means all
    /// zero) are indexed by order starting at 0. Throws InvalidInput unless
    /// values[0] and values[1] equal 1 to 1e-9, every entry is finite,
    /// uncertainties are >= 0 and the mean is > 0.
    static MomentReport make(std::vector<double> values, std::vector<double> uncertainties,
                             double mean_photon_number, double mean_uncertainty,
                             MomentSource source);

    std::size_t m_max() const { return values.size() - 1; }
    /// Throws InvalidInput when m > m_max.
    double g(std::size_t m) const;
    double sigma(std::size_t m) const;
};

/// g^(m) = sum n!/(n-m)! rho_n / <n>^m for m = 0..m_max. Throws InvalidInput
/// for <n> = 0 or m_max > n_max.
MomentReport moments_from_statistics(const PhotonStatistics& stats, std::size_t m_max);

/// Closed forms: k(k-1)...(k-m+1)/k^m for |k>, m! for thermal light.
double fock_normalized_moment(std::size_t k, std::size_t m);
double thermal_normalized_moment(std::size_t m);

/// A series value together with a bound on its truncation/rounding error.
struct BoundedValue {
    double value = 0.0;
    double error_bound = 0.0;
};

/// M(mu) = sum_n (1 - mu)^n rho_n. The bound covers the declared tail mass and
/// rounding. Throws InvalidInput unless 0 <= mu <= 2.
BoundedValue moment_generating_function(const PhotonStatistics& stats, double mu);

/// M(mu) = sum_m g^(m)/m! (-mu <n>)^m from a moment report.
///
/// A series whose final terms vanish identically is exact. Otherwise the tail
/// is bounded geometrically from the last term ratio r as |t_M| r/(1-r)
/// (infinite for r >= 1). Throws ConvergenceError when the terms are still
/// growing over the last two orders.
BoundedValue moment_generating_function(const MomentReport& report, double mu);

/// Parity <(-1)^n> = M(2).
BoundedValue parity(const PhotonStatistics& stats);
BoundedValue parity(const MomentReport& report);

// Nonclassicality ------------------------------------------------------------

/// Result of a classicality inequality of the form slack >= 0.
///
/// `uncertainty` is the propagated standard deviation of the slack (0 for
/// analytic input). The flag is raised only when slack < -3 uncertainty, or
/// slack < -1e-9 for exact input.
struct NonclassicalityVerdict {
    std::string criterion;
    double statistic = 0.0;
    double slack = 0.0;
    double uncertainty = 0.0;
    bool nonclassical = false;
    /// -slack / uncertainty when uncertainty > 0.
    std::optional<double> significance;
    /// Order (monotonicity) or first offending index, when meaningful.
    std::optional<std::size_t> order;
    /// Moment-matrix extras.
    std::optional<double> determinant;
    std::vector<double> eigenvalues;
};

inline constexpr double kAnalyticTolerance = 1e-9;
inline constexpr double kSignificanceSigmas = 3.0;

/// Applies the decision rule to a slack and its uncertainty.
NonclassicalityVerdict judge(std::string criterion, double statistic, double slack,
                             double uncertainty);

/// Hankel matrix [g^(i+j)], i, j = 0..size-1; statistic is its smallest
/// eigenvalue. Throws InvalidInput when the report lacks order 2 size - 2.
NonclassicalityVerdict moment_matrix_test(const MomentReport& report, std::size_t size);

/// Classical light obeys g^(m+1) >= g^(m) for m >= 1. Reports the lowest
/// flagged pair m (in `order`), or the closest-to-flagging pair if none is.
NonclassicalityVerdict monotonicity_test(const MomentReport& report);

/// g^(h-m) g^(h+m) >= [g^(h)]^2. Requires m >= 1, h >= m, h + m <= m_max.
NonclassicalityVerdict schwarz_test(const MomentReport& report, std::size_t h, std::size_t m);

}  // namespace photocorr
