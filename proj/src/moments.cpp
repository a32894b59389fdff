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

#include "photocorr/moments.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "photocorr/error.hpp"
#include "photocorr/format.hpp"

namespace photocorr {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_mu(double mu) {
    if (!(mu >= 0.0 && mu <= 2.0)) throw InvalidInput("mu must lie in [0, 2], got " + format_double(mu));
}

}  // namespace

const char* to_string(MomentSource source) {
    switch (source) {
        case MomentSource::kAnalytic:
            return "analytic";
        case MomentSource::kMonteCarlo:
            return "monte-carlo";
        case MomentSource::kMeasured:
            return "measured";
    }
    return "unknown";
}

MomentReport MomentReport::make(std::vector<double> values, std::vector<double> uncertainties,
                                double mean_photon_number, double mean_uncertainty,
                                MomentSource source) {
    if (values.size() < 2) throw InvalidInput("moment report needs orders 0 and 1");
    if (uncertainties.empty()) uncertainties.assign(values.size(), 0.0);
    if (uncertainties.size() != values.size()) {
        throw InvalidInput("moment values and uncertainties differ in length");
    }
    if (std::abs(values[0] - 1.0) > 1e-9 || std::abs(values[1] - 1.0) > 1e-9) {
        throw InvalidInput("g^(0) and g^(1) must equal 1");
    }
    values[0] = values[1] = 1.0;
    uncertainties[0] = uncertainties[1] = 0.0;
    for (std::size_t m = 0; m < values.size(); ++m) {
        if (!std::isfinite(values[m])) throw InvalidInput("g^(" + std::to_string(m) + ") is not finite");
        if (!(uncertainties[m] >= 0.0) || !std::isfinite(uncertainties[m])) {
            throw InvalidInput("uncertainty of g^(" + std::to_string(m) + ") must be finite and >= 0");
        }
    }
    if (!(mean_photon_number > 0.0) || !std::isfinite(mean_photon_number)) {
        throw InvalidInput("mean photon number must be positive");
    }
    if (!(mean_uncertainty >= 0.0)) throw InvalidInput("mean uncertainty must be >= 0");
    MomentReport r;
    r.values = std::move(values);
    r.uncertainties = std::move(uncertainties);
    r.mean_photon_number = mean_photon_number;
    r.mean_uncertainty = mean_uncertainty;
    r.source = source;
    return r;
}

double MomentReport::g(std::size_t m) const {
    if (m >= values.size()) {
        throw InvalidInput("order " + std::to_string(m) + " not in report (m_max=" + std::to_string(m_max()) + ")");
    }
    return values[m];
}

double MomentReport::sigma(std::size_t m) const {
    if (m >= uncertainties.size()) throw InvalidInput("order " + std::to_string(m) + " not in report");
    return uncertainties[m];
}

MomentReport moments_from_statistics(const PhotonStatistics& stats, std::size_t m_max) {
    if (m_max < 1) throw InvalidInput("m_max must be >= 1");
    if (m_max > stats.n_max()) {
        throw InvalidInput("m_max=" + std::to_string(m_max) + " exceeds n_max=" + std::to_string(stats.n_max()));
    }
    const double mean = stats.mean();
    if (!(mean > 0.0)) throw InvalidInput("vacuum-only statistics: g^(m) normalization undefined");
    std::vector<double> g(m_max + 1, 0.0);
    g[0] = g[1] = 1.0;
    const auto probs = stats.probs();
    for (std::size_t m = 2; m <= m_max; ++m) {
        // Falling factorial over <n>^m, built as prod (n - j) / <n> to stay in range.
        double total = 0.0;
        for (std::size_t n = m; n < probs.size(); ++n) {
            if (probs[n] == 0.0) continue;
            double term = probs[n];
            for (std::size_t j = 0; j < m; ++j) term *= static_cast<double>(n - j) / mean;
            total += term;
        }
        g[m] = total;
    }
    MomentReport r;
    r.values = std::move(g);
    r.uncertainties.assign(r.values.size(), 0.0);
    r.mean_photon_number = mean;
    r.source = MomentSource::kAnalytic;
    return r;
}

double fock_normalized_moment(std::size_t k, std::size_t m) {
    if (m == 0) return 1.0;
    if (k == 0) throw InvalidInput("vacuum has no normalized moments");
    double g = 1.0;
    const double kd = static_cast<double>(k);
    for (std::size_t j = 0; j < m; ++j) {
        if (j >= k) return 0.0;
        g *= static_cast<double>(k - j) / kd;
    }
    return g;
}

double thermal_normalized_moment(std::size_t m) { return std::tgamma(static_cast<double>(m) + 1.0); }

BoundedValue moment_generating_function(const PhotonStatistics& stats, double mu) {
    check_mu(mu);
    const double base = 1.0 - mu;
    double value = 0.0;
    double power = 1.0;
    for (double p : stats.probs()) {
        value += power * p;
        power *= base;
    }
    // |1 - mu| <= 1, so the unseen tail contributes at most tail_bound.
    const double rounding = 4.0 * static_cast<double>(stats.n_max() + 2) * kEps;
    return {value, stats.tail_bound() + rounding};
}

BoundedValue moment_generating_function(const MomentReport& report, double mu) {
    check_mu(mu);
    const double x = -mu * report.mean_photon_number;
    const std::size_t top = report.m_max();
    std::vector<double> terms(top + 1);
    double coeff = 1.0;  // x^m / m!
    double abs_sum = 0.0;
    double value = 0.0;
    for (std::size_t m = 0; m <= top; ++m) {
        if (m > 0) coeff *= x / static_cast<double>(m);
        terms[m] = report.values[m] * coeff;
        value += terms[m];
        abs_sum += std::abs(terms[m]);
    }
    const double rounding = 64.0 * kEps * abs_sum;
    if (mu == 0.0) return {value, rounding};

    // A terminated series (e.g. Fock input) is exact.
    std::size_t last_nonzero = 0;
    for (std::size_t m = 0; m <= top; ++m)
        if (terms[m] != 0.0) last_nonzero = m;
    if (last_nonzero + 2 <= top) return {value, rounding};

    if (top >= 2) {
        const double a = std::abs(terms[top - 2]);
        const double b = std::abs(terms[top - 1]);
        const double c = std::abs(terms[top]);
        if (b > a && c > b) {
            throw ConvergenceError("moment series for M(mu=" + format_double(mu) +
                                   ") still growing at order " + std::to_string(top));
        }
    }
    if (top == 0) return {value, std::numeric_limits<double>::infinity()};
    const double last = std::abs(terms[top]);
    const double prev = std::abs(terms[top - 1]);
    if (prev == 0.0) return {value, last == 0.0 ? rounding : std::numeric_limits<double>::infinity()};
    const double r = last / prev;
    if (r >= 1.0) return {value, std::numeric_limits<double>::infinity()};
    return {value, last * r / (1.0 - r) + rounding};
}

BoundedValue parity(const PhotonStatistics& stats) { return moment_generating_function(stats, 2.0); }
BoundedValue parity(const MomentReport& report) { return moment_generating_function(report, 2.0); }

NonclassicalityVerdict judge(std::string criterion, double statistic, double slack, double uncertainty) {
    NonclassicalityVerdict v;
    v.criterion = std::move(criterion);
    v.statistic = statistic;
    v.slack = slack;
    v.uncertainty = uncertainty;
    if (uncertainty > 0.0) {
        v.significance = -slack / uncertainty;
        v.nonclassical = slack < -kSignificanceSigmas * uncertainty;
    } else {
        v.nonclassical = slack < -kAnalyticTolerance;
    }
    return v;
}

NonclassicalityVerdict moment_matrix_test(const MomentReport& report, std::size_t size) {
    if (size < 1) throw InvalidInput("moment matrix size must be >= 1");
    if (2 * size - 2 > report.m_max()) {
        throw InvalidInput("moment matrix of size " + std::to_string(size) + " needs g^(" +
                           std::to_string(2 * size - 2) + "), report stops at " +
                           std::to_string(report.m_max()));
    }
    const auto n = static_cast<Eigen::Index>(size);
    Eigen::MatrixXd h(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) h(i, j) = report.values[static_cast<std::size_t>(i + j)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    const double lambda = eig.eigenvalues()(0);
    const Eigen::VectorXd v = eig.eigenvectors().col(0);
    // d(lambda) = v^T dH v = sum_k dg_k sum_{i+j=k} v_i v_j.
    double var = 0.0;
    for (std::size_t k = 0; k <= 2 * size - 2; ++k) {
        double weight = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index j = static_cast<Eigen::Index>(k) - i;
            if (j >= 0 && j < n) weight += v(i) * v(j);
        }
        var += std::pow(report.uncertainties[k] * weight, 2);
    }
    auto verdict = judge("moment-matrix-" + std::to_string(size), lambda, lambda, std::sqrt(var));
    verdict.determinant = h.determinant();
    verdict.eigenvalues.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + n);
    return verdict;
}

NonclassicalityVerdict monotonicity_test(const MomentReport& report) {
    if (report.m_max() < 2) throw InvalidInput("monotonicity test needs g^(2)");
    std::optional<NonclassicalityVerdict> closest;
    double closest_score = std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m < report.m_max(); ++m) {
        const double slack = report.values[m + 1] - report.values[m];
        const double sigma = std::hypot(report.uncertainties[m + 1], report.uncertainties[m]);
        auto v = judge("monotonicity", slack, slack, sigma);
        v.order = m;
        if (v.nonclassical) return v;
        const double scale = sigma > 0.0 ? kSignificanceSigmas * sigma : kAnalyticTolerance;
        const double score = slack / scale;
        if (score < closest_score) {
            closest_score = score;
            closest = std::move(v);
        }
    }
    return *closest;
}

NonclassicalityVerdict schwarz_test(const MomentReport& report, std::size_t h, std::size_t m) {
    if (m < 1 || h < m) throw InvalidInput("Schwarz test needs m >= 1 and h >= m");
    if (h + m > report.m_max()) {
        throw InvalidInput("Schwarz test needs g^(" + std::to_string(h + m) + ")");
    }
    const double lo = report.values[h - m];
    const double hi = report.values[h + m];
    const double mid = report.values[h];
    const double slack = lo * hi - mid * mid;
    const double sigma = std::sqrt(std::pow(hi * report.uncertainties[h - m], 2) +
                                   std::pow(lo * report.uncertainties[h + m], 2) +
                                   std::pow(2.0 * mid * report.uncertainties[h], 2));
    auto v = judge("schwarz-h" + std::to_string(h) + "-m" + std::to_string(m), slack, slack, sigma);
    v.order = h;
    return v;
}

}  // namespace photocorr
