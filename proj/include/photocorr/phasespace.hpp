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
#include <variant>
#include <vector>

#include "photocorr/fock.hpp"
#include "photocorr/moments.hpp"

namespace photocorr {

/// A state to reconstruct: diagonal in the number basis, or pure.
using PhaseSpaceState = std::variant<PhotonStatistics, FockAmplitudeVector>;

inline constexpr double kDisplacedTailTolerance = 1e-10;

/// rho_n(alpha) = <n| D^dagger(alpha) rho D(alpha) |n>. The output truncation
/// is doubled from max(state n_max + 16, min_n_max) until the unitarity
/// deficit plus the input's own tail is <= tail_tolerance; TruncationError
/// when that needs more than the 400-dimensional displacement cap.
PhotonStatistics displaced_statistics(const PhaseSpaceState& state, const DisplacementAmplitude& alpha,
                                      std::size_t min_n_max = 0,
                                      double tail_tolerance = kDisplacedTailTolerance);

struct SeriesValue {
    double value = 0.0;
    /// |last term| (0 for a terminated series).
    double residual = 0.0;
    /// Last three terms strictly decreasing in magnitude and the last below
    /// 1e-3 * 2/pi, or the series terminated (its final term and all higher
    /// moments in the report are 0, at least two zeros in all).
    bool converged = false;
    /// First-order propagation of the report's per-order uncertainties
    /// (mean photon number taken as exact).
    double uncertainty = 0.0;
};

/// W(alpha) = (2/pi) sum_{m<=m_max} (-2)^m / m! g^(m)_alpha <n>_alpha^m.
SeriesValue wigner_from_moments(const MomentReport& displaced, std::size_t m_max);

/// Q(alpha) = (1/pi) sum_{m<=m_max} (-1)^m / m! g^(m)_alpha <n>_alpha^m.
SeriesValue q_from_moments(const MomentReport& displaced, std::size_t m_max);

/// |chi(alpha)|^2 for |n>: sum_{m<=m_max} (-1)^m / (n! m!) g^(m+n) <n>^(m+n),
/// i.e. the displaced state's rho_n. Needs the report to reach m_max + n.
SeriesValue chi_squared_fock(std::size_t n, const MomentReport& displaced, std::size_t m_max);

/// Direct sums over displaced statistics, used as oracles.
double wigner_from_statistics(const PhotonStatistics& displaced);
double q_from_statistics(const PhotonStatistics& displaced);

struct ReconstructionPoint {
    DisplacementAmplitude alpha;
    std::size_t m_max = 0;
    SeriesValue wigner, q, chi2;
    double wigner_oracle = 0.0, q_oracle = 0.0, chi2_oracle = 0.0;
};

struct ReconstructionGrid {
    std::size_t chi_order = 1;
    std::vector<ReconstructionPoint> points;  // alpha-major, then m_max
};

/// Exact displaced moments (to max m_max + chi_order) for every alpha, then
/// every reconstruction at every truncation order. Parallel over alpha.
ReconstructionGrid reconstruct_grid(const PhaseSpaceState& state, const std::vector<DisplacementAmplitude>& alphas,
                                    const std::vector<std::size_t>& m_max_list, std::size_t chi_order = 1,
                                    unsigned threads = 0);

/// Points |alpha| = lo..hi (count values) at the given phase.
std::vector<DisplacementAmplitude> radial_grid(double lo, double hi, std::size_t count, double phase = 0.0);

/// Columns: re_alpha,im_alpha,m_max,W,Q,chi2,residual,converged, then the
/// per-quantity residuals, flags and oracle values. `residual` is the largest
/// of the three and `converged` requires all three.
void write_reconstruction_csv(std::ostream& out, const ReconstructionGrid& grid);

}  // namespace photocorr
