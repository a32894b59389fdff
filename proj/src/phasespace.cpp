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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>

#include "photocorr/error.hpp"
#include "photocorr/format.hpp"
#include "photocorr/random.hpp"

namespace photocorr {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr std::size_t kMaxDisplacedDim = 400;
constexpr double kTermThreshold = 1e-3 * 2.0 / std::numbers::pi;

std::size_t state_n_max(const PhaseSpaceState& state) {
    return std::visit([](const auto& s) { return s.n_max(); }, state);
}

double state_tail(const PhaseSpaceState& state) {
    return std::visit([](const auto& s) { return s.tail_bound(); }, state);
}

std::vector<double> displaced_probs(const PhaseSpaceState& state, const Eigen::MatrixXcd& d) {
    const auto dim = static_cast<std::size_t>(d.rows());
    std::vector<double> probs(dim, 0.0);
    if (const auto* diag = std::get_if<PhotonStatistics>(&state)) {
        for (std::size_t k = 0; k <= diag->n_max(); ++k) {
            const double p = (*diag)[k];
            if (p == 0.0) continue;
            for (std::size_t n = 0; n < dim; ++n)
                probs[n] += p * std::norm(d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)));
        }
    } else {
        const auto amps = std::get<FockAmplitudeVector>(state).amps();
        for (std::size_t n = 0; n < dim; ++n) {
            std::complex<double> b = 0.0;
            for (std::size_t k = 0; k < amps.size(); ++k)
                b += d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) * amps[k];
            probs[n] = std::norm(b);
        }
    }
    return probs;
}

// Sums coeff(m) * g^(m + shift) <n>^(m + shift) for m = 0..m_max.
template <typename Coeff>
SeriesValue evaluate_series(const MomentReport& report, std::size_t m_max, std::size_t shift, Coeff coeff) {
    if (m_max + shift > report.m_max()) {
        throw InvalidInput("reconstruction to order " + std::to_string(m_max + shift) + " needs moments the report (m_max=" +
                           std::to_string(report.m_max()) + ") does not have");
    }
    const double mean = report.mean_photon_number;
    std::vector<double> terms(m_max + 1);
    SeriesValue out;
    double var = 0.0;
    for (std::size_t m = 0; m <= m_max; ++m) {
        const double scale = coeff(m) * std::pow(mean, static_cast<double>(m + shift));
        terms[m] = scale * report.values[m + shift];
        out.value += terms[m];
        var += std::pow(scale * report.sigma(m + shift), 2);
    }
    out.uncertainty = std::sqrt(var);
    // Terminated: the final term and every higher moment the report holds are
    // zero, with at least two zeros in total.
    std::size_t zeros = 0;
    for (std::size_t m = m_max + 1; m-- > 0 && terms[m] == 0.0;) ++zeros;
    bool tail_zero = zeros > 0;
    for (std::size_t k = m_max + shift + 1; tail_zero && k <= report.m_max(); ++k, ++zeros)
        tail_zero = report.values[k] == 0.0;
    if (tail_zero && zeros >= 2) {
        out.residual = 0.0;
        out.converged = true;
        return out;
    }
    out.residual = std::abs(terms[m_max]);
    out.converged = m_max >= 2 && std::abs(terms[m_max]) < std::abs(terms[m_max - 1]) &&
                    std::abs(terms[m_max - 1]) < std::abs(terms[m_max - 2]) && out.residual < kTermThreshold;
    return out;
}

double inverse_factorial(std::size_t m) { return std::exp(-std::lgamma(static_cast<double>(m) + 1.0)); }

}  // namespace

PhotonStatistics displaced_statistics(const PhaseSpaceState& state, const DisplacementAmplitude& alpha,
                                      std::size_t min_n_max, double tail_tolerance) {
    const DisplacementAmplitude minus(-alpha.re(), -alpha.im());
    const double input_tail = state_tail(state);
    std::size_t n_max = std::max(state_n_max(state) + 16, min_n_max);
    for (;;) {
        const std::size_t dim = std::min(n_max, kMaxDisplacedDim - 1);
        auto probs = displaced_probs(state, displacement_matrix(minus, dim));
        double total = 0.0;
        for (double p : probs) total += p;
        const double deficit = std::clamp(1.0 - input_tail - total, 0.0, 1.0);
        const double tail = deficit + input_tail + 8.0 * static_cast<double>(dim + 2) * kEps;
        if (tail <= tail_tolerance) return PhotonStatistics(std::move(probs), tail);
        if (dim == kMaxDisplacedDim - 1) {
            throw TruncationError("displaced statistics at |alpha|=" + format_double(alpha.magnitude()) +
                                  " lose mass " + format_double(tail) + " > " + format_double(tail_tolerance) +
                                  " within the " + std::to_string(kMaxDisplacedDim) + "-dimensional cap");
        }
        n_max *= 2;
    }
}

SeriesValue wigner_from_moments(const MomentReport& displaced, std::size_t m_max) {
    auto v = evaluate_series(displaced, m_max, 0, [](std::size_t m) {
        return 2.0 / std::numbers::pi * std::pow(-2.0, static_cast<double>(m)) * inverse_factorial(m);
    });
    return v;
}

SeriesValue q_from_moments(const MomentReport& displaced, std::size_t m_max) {
    return evaluate_series(displaced, m_max, 0, [](std::size_t m) {
        return (m % 2 ? -1.0 : 1.0) / std::numbers::pi * inverse_factorial(m);
    });
}

SeriesValue chi_squared_fock(std::size_t n, const MomentReport& displaced, std::size_t m_max) {
    return evaluate_series(displaced, m_max, n, [n](std::size_t m) {
        return (m % 2 ? -1.0 : 1.0) * inverse_factorial(n) * inverse_factorial(m);
    });
}

double wigner_from_statistics(const PhotonStatistics& displaced) {
    double total = 0.0;
    for (std::size_t n = 0; n <= displaced.n_max(); ++n) total += (n % 2 ? -1.0 : 1.0) * displaced[n];
    return 2.0 / std::numbers::pi * total;
}

double q_from_statistics(const PhotonStatistics& displaced) { return displaced[0] / std::numbers::pi; }

ReconstructionGrid reconstruct_grid(const PhaseSpaceState& state, const std::vector<DisplacementAmplitude>& alphas,
                                    const std::vector<std::size_t>& m_max_list, std::size_t chi_order,
                                    unsigned threads) {
    if (m_max_list.empty()) throw InvalidInput("m_max list is empty");
    const std::size_t top = *std::max_element(m_max_list.begin(), m_max_list.end()) + chi_order;
    ReconstructionGrid grid;
    grid.chi_order = chi_order;
    grid.points.resize(alphas.size() * m_max_list.size());
    parallel_chunks(alphas.size(), threads, [&](std::size_t a) {
        const auto stats = displaced_statistics(state, alphas[a], top);
        // The displaced vacuum has no normalized moments; every series
        // reduces to its m = 0 term.
        const bool vacuum = stats.mean() == 0.0;
        const std::optional<MomentReport> report =
            vacuum ? std::nullopt : std::optional(moments_from_statistics(stats, top));
        for (std::size_t j = 0; j < m_max_list.size(); ++j) {
            auto& p = grid.points[a * m_max_list.size() + j];
            p.alpha = alphas[a];
            p.m_max = m_max_list[j];
            if (vacuum) {
                p.wigner = {2.0 / std::numbers::pi, 0.0, true, 0.0};
                p.q = {1.0 / std::numbers::pi, 0.0, true, 0.0};
                p.chi2 = {chi_order == 0 ? 1.0 : 0.0, 0.0, true, 0.0};
            } else {
                p.wigner = wigner_from_moments(*report, p.m_max);
                p.q = q_from_moments(*report, p.m_max);
                p.chi2 = chi_squared_fock(chi_order, *report, p.m_max);
            }
            p.wigner_oracle = wigner_from_statistics(stats);
            p.q_oracle = q_from_statistics(stats);
            p.chi2_oracle = stats[chi_order];
        }
    });
    return grid;
}

std::vector<DisplacementAmplitude> radial_grid(double lo, double hi, std::size_t count, double phase) {
    if (count < 1 || lo < 0.0 || hi < lo || (count == 1 && hi != lo))
        throw InvalidInput("radial grid needs 0 <= lo <= hi and count >= 1");
    std::vector<DisplacementAmplitude> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double r = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        out.push_back(DisplacementAmplitude::polar(r, phase));
    }
    return out;
}

void write_reconstruction_csv(std::ostream& out, const ReconstructionGrid& grid) {
    out << "re_alpha,im_alpha,m_max,W,Q,chi2,residual,converged,W_residual,Q_residual,chi2_residual,"
           "W_converged,Q_converged,chi2_converged,W_oracle,Q_oracle,chi2_oracle\n";
    auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
    for (const auto& p : grid.points) {
        const double residual = std::max({p.wigner.residual, p.q.residual, p.chi2.residual});
        const bool converged = p.wigner.converged && p.q.converged && p.chi2.converged;
        out << join_csv({format_double(p.alpha.re()), format_double(p.alpha.im()), std::to_string(p.m_max),
                         format_double(p.wigner.value), format_double(p.q.value), format_double(p.chi2.value),
                         format_double(residual), flag(converged), format_double(p.wigner.residual),
                         format_double(p.q.residual), format_double(p.chi2.residual), flag(p.wigner.converged),
                         flag(p.q.converged), flag(p.chi2.converged), format_double(p.wigner_oracle),
                         format_double(p.q_oracle), format_double(p.chi2_oracle)})
            << '\n';
    }
}

}  // namespace photocorr
