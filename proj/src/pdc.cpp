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

#include "photocorr/pdc.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>

#include "photocorr/error.hpp"
#include "photocorr/format.hpp"
#include "photocorr/random.hpp"

namespace photocorr {

namespace {

void check_axis(const std::vector<double>& axis, const char* name) {
    if (axis.size() < 2) throw InvalidInput(std::string(name) + " axis needs at least 2 points");
    const double step = axis[1] - axis[0];
    for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
        const double d = axis[i + 1] - axis[i];
        if (!std::isfinite(d) || d <= 0.0) throw InvalidInput(std::string(name) + " axis must be strictly increasing");
        if (std::abs(d - step) > 1e-6 * std::abs(step))
            throw InvalidInput(std::string(name) + " axis must be uniformly spaced");
    }
}

double sum_fourth(const Eigen::VectorXd& s) {
    const double total = s.squaredNorm();
    double s4 = 0.0;
    for (Eigen::Index q = 0; q < s.size(); ++q) s4 += std::pow(s[q] * s[q] / total, 2);
    return s4;
}

double falling(std::size_t n, std::size_t m) {
    double r = 1.0;
    for (std::size_t j = 0; j < m; ++j) r *= static_cast<double>(n - j);
    return r;
}

constexpr std::size_t kMaxJointNmax = 1024;
constexpr double kMinMean = 1e-9;
constexpr double kMaxMean = 20.0;

}  // namespace

// JSA ----------------------------------------------------------------------------

void JointSpectralAmplitude::validate() const {
    check_axis(signal_frequencies, "signal");
    check_axis(idler_frequencies, "idler");
    if (static_cast<std::size_t>(amplitude.rows()) != signal_frequencies.size() ||
        static_cast<std::size_t>(amplitude.cols()) != idler_frequencies.size())
        throw InvalidInput("amplitude shape does not match the frequency axes");
    if (!amplitude.allFinite()) throw InvalidInput("amplitude has non-finite entries");
    if (amplitude.norm() == 0.0) throw InvalidInput("amplitude is identically zero");
}

std::vector<double> linear_grid(double lo, double hi, std::size_t count) {
    if (count < 2 || !(hi > lo)) throw InvalidInput("linear_grid needs count >= 2 and hi > lo");
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return grid;
}

JointSpectralAmplitude read_jsa_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "omega_s,omega_i,re,im")
        throw InvalidInput("JSA CSV must start with header omega_s,omega_i,re,im");
    std::map<std::pair<double, double>, std::complex<double>> cells;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4) throw InvalidInput("line " + std::to_string(line_no) + ": expected 4 fields");
        double v[4];
        for (int k = 0; k < 4; ++k) v[k] = parse_double(fields[static_cast<std::size_t>(k)]);
        if (!cells.emplace(std::pair{v[0], v[1]}, std::complex<double>(v[2], v[3])).second)
            throw InvalidInput("line " + std::to_string(line_no) + ": duplicate grid point");
    }
    std::vector<double> signal, idler;
    for (const auto& [key, value] : cells) {
        signal.push_back(key.first);
        idler.push_back(key.second);
    }
    auto unique_sorted = [](std::vector<double>& axis) {
        std::sort(axis.begin(), axis.end());
        axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    };
    unique_sorted(signal);
    unique_sorted(idler);
    if (cells.size() != signal.size() * idler.size())
        throw InvalidInput("JSA CSV does not cover a full rectangular grid");
    JointSpectralAmplitude jsa{signal, idler, {}};
    jsa.amplitude.resize(static_cast<Eigen::Index>(signal.size()), static_cast<Eigen::Index>(idler.size()));
    for (std::size_t r = 0; r < signal.size(); ++r)
        for (std::size_t c = 0; c < idler.size(); ++c)
            jsa.amplitude(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cells.at({signal[r], idler[c]});
    jsa.validate();
    return jsa;
}

void write_jsa_csv(std::ostream& out, const JointSpectralAmplitude& jsa) {
    jsa.validate();
    out << "omega_s,omega_i,re,im\n";
    for (std::size_t r = 0; r < jsa.signal_frequencies.size(); ++r) {
        for (std::size_t c = 0; c < jsa.idler_frequencies.size(); ++c) {
            const auto f = jsa.amplitude(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            out << join_csv({format_double(jsa.signal_frequencies[r]), format_double(jsa.idler_frequencies[c]),
                             format_double(f.real()), format_double(f.imag())})
                << '\n';
        }
    }
}

// Schmidt ------------------------------------------------------------------------

SchmidtSpectrum SchmidtSpectrum::from_weights(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw InvalidInput("Schmidt weights must be finite and nonnegative");
        total += w * w;
    }
    if (total <= 0.0) throw InvalidInput("Schmidt weights are all zero");
    std::sort(weights.begin(), weights.end(), std::greater<>());
    while (!weights.empty() && weights.back() == 0.0) weights.pop_back();
    const double norm = std::sqrt(total);
    for (double& w : weights) w /= norm;
    SchmidtSpectrum s;
    s.weights = std::move(weights);
    return s;
}

double SchmidtSpectrum::sum_power(int p) const {
    double total = 0.0;
    for (double w : weights) total += std::pow(w, p);
    return total;
}

double SchmidtSpectrum::effective_mode_number() const { return 1.0 / sum_power(4); }

SchmidtSpectrum schmidt_decompose(const JointSpectralAmplitude& jsa, const SchmidtOptions& options) {
    jsa.validate();
    const double ds = jsa.signal_frequencies[1] - jsa.signal_frequencies[0];
    const double di = jsa.idler_frequencies[1] - jsa.idler_frequencies[0];
    const Eigen::MatrixXcd scaled = jsa.amplitude * std::sqrt(ds * di);

    Eigen::BDCSVD<Eigen::MatrixXcd> svd(scaled);
    const Eigen::VectorXd s = svd.singularValues();
    const double total = s.squaredNorm();
    const double cut = options.rank_cutoff * s[0];
    std::vector<double> kept;
    double dropped = 0.0;
    for (Eigen::Index q = 0; q < s.size(); ++q) {
        if (s[q] >= cut && s[q] > 0.0) {
            kept.push_back(s[q]);
        } else {
            dropped += s[q] * s[q];
        }
    }
    SchmidtSpectrum spectrum = SchmidtSpectrum::from_weights(kept);
    spectrum.residual = dropped / total;
    if (spectrum.residual > options.max_residual) {
        throw ConvergenceError("Schmidt residual " + format_double(spectrum.residual) + " exceeds " +
                               format_double(options.max_residual));
    }

    // sum lambda^4 over all modes differs from the retained (renormalized)
    // value by at most 2 r S4 + r (cutoff)^2.
    const double s4 = spectrum.sum_power(4);
    const double r = spectrum.residual;
    const double delta = 2.0 * r * s4 + r * options.rank_cutoff * options.rank_cutoff;
    const double k = 1.0 / s4;
    spectrum.mode_number_error =
        delta < s4 ? k * k * delta / (1.0 - delta / s4) : std::numeric_limits<double>::infinity();

    const Eigen::Index rows = scaled.rows(), cols = scaled.cols();
    double edge = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            if (i == 0 || j == 0 || i == rows - 1 || j == cols - 1) edge += std::norm(scaled(i, j));
    const double edge_fraction = edge / total;
    if (edge_fraction > options.max_edge_fraction) {
        throw ConvergenceError("grid window truncates the amplitude: boundary holds fraction " +
                               format_double(edge_fraction) + " of |f|^2");
    }

    if (rows >= 8 && cols >= 8) {
        const Eigen::Index sub_rows = (rows + 1) / 2, sub_cols = (cols + 1) / 2;
        Eigen::MatrixXcd sub(sub_rows, sub_cols);
        for (Eigen::Index i = 0; i < sub_rows; ++i)
            for (Eigen::Index j = 0; j < sub_cols; ++j) sub(i, j) = scaled(2 * i, 2 * j);
        Eigen::BDCSVD<Eigen::MatrixXcd> coarse(sub);
        const double k_coarse = 1.0 / sum_fourth(coarse.singularValues());
        spectrum.resolution_drift = std::abs(k_coarse - k) / k;
        if (spectrum.resolution_drift > options.max_resolution_drift) {
            throw ConvergenceError("grid too coarse: K changes by " + format_double(spectrum.resolution_drift) +
                                   " (relative) on the half-resolution grid");
        }
    }
    return spectrum;
}

// Joint moments -------------------------------------------------------------------

double joint_normalized_moment(const JointPhotonStatistics& joint, std::size_t w, std::size_t v) {
    if (w + v == 0) throw InvalidInput("joint moment needs w + v >= 1");
    if (w > joint.n_max_signal() || v > joint.n_max_idler())
        throw InvalidInput("joint moment order exceeds the truncation");
    const auto& p = joint.probs();
    double num = 0.0, mean_s = 0.0, mean_i = 0.0;
    for (Eigen::Index a = 0; a < p.rows(); ++a) {
        for (Eigen::Index b = 0; b < p.cols(); ++b) {
            const double q = p(a, b);
            if (q == 0.0) continue;
            const auto ns = static_cast<std::size_t>(a), ni = static_cast<std::size_t>(b);
            mean_s += q * static_cast<double>(ns);
            mean_i += q * static_cast<double>(ni);
            if (ns >= w && ni >= v) num += q * falling(ns, w) * falling(ni, v);
        }
    }
    if ((w > 0 && mean_s <= 0.0) || (v > 0 && mean_i <= 0.0))
        throw InvalidInput("joint moment undefined for a vanishing marginal mean");
    return num / (std::pow(mean_s, static_cast<double>(w)) * std::pow(mean_i, static_cast<double>(v)));
}

double strength_for_mean(const SchmidtSpectrum& spectrum, double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean)) throw InvalidInput("mean photon number must be positive");
    double hi = 1.0;
    while (twin_beam_mean_photon_number(spectrum.weights, hi) < mean) {
        hi *= 2.0;
        if (hi > 64.0) throw InvalidInput("mean photon number out of range");
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (twin_beam_mean_photon_number(spectrum.weights, mid) < mean ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

JointPhotonStatistics twin_beam_joint(const SchmidtSpectrum& spectrum, double strength, std::size_t minimum_n_max,
                                      double tail_tolerance) {
    std::size_t n_max = 8;
    while (n_max < minimum_n_max) n_max *= 2;
    for (;; n_max *= 2) {
        try {
            return two_mode_squeezed_joint(spectrum.weights, strength, n_max, tail_tolerance);
        } catch (const TruncationError&) {
            if (n_max >= kMaxJointNmax) throw;
        }
    }
}

std::optional<double> joint_moment_closed_form(std::size_t w, std::size_t v, double mean,
                                               double inverse_mode_number, double sum_lambda6) {
    if (w > v) std::swap(w, v);
    const double g20 = 1.0 + inverse_mode_number;
    if (w == 1 && v == 1) return 1.0 / mean + inverse_mode_number + 1.0;
    if (w == 0 && v == 2) return g20;
    if (w == 1 && v == 2) return (1.0 + 2.0 / mean) * g20 + 2.0 * (inverse_mode_number + sum_lambda6);
    return std::nullopt;
}

JointMoment joint_moment(const SchmidtSpectrum& spectrum, double strength, std::size_t w, std::size_t v,
                         double tail_tolerance) {
    if (w + v == 0) throw InvalidInput("joint moment needs w + v >= 1");
    if (!(strength > 0.0)) throw InvalidInput("process strength must be positive");
    const auto joint = twin_beam_joint(spectrum, strength, w + v + 8, tail_tolerance);
    JointMoment out;
    out.exact = joint_normalized_moment(joint, w, v);
    out.mean_photon_number = twin_beam_mean_photon_number(spectrum.weights, strength);
    out.strength = strength;
    out.n_max = joint.n_max_signal();
    out.tail_bound = joint.tail_bound();
    out.closed_form =
        joint_moment_closed_form(w, v, out.mean_photon_number, spectrum.sum_power(4), spectrum.sum_power(6));
    return out;
}

// Heralding ------------------------------------------------------------------------

void HeraldSetup::validate() const {
    detector.validate();
    if (detector.kind == DetectorKind::kPnr && detector.dark_count != 0.0)
        throw InvalidInput("dark counts are not modelled for a PNR herald");
}

double herald_povm(const HeraldSetup& setup, std::size_t n) {
    const double eta = setup.detector.efficiency;
    if (setup.detector.kind == DetectorKind::kClick) {
        return 1.0 - (1.0 - setup.detector.dark_count) * std::pow(1.0 - eta, static_cast<double>(n));
    }
    const std::size_t k = setup.outcome;
    if (n < k) return 0.0;
    const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0);
    return std::exp(log_binom) * std::pow(eta, static_cast<double>(k)) * std::pow(1.0 - eta, static_cast<double>(n - k));
}

PhotonStatistics herald_state(const JointPhotonStatistics& joint, const HeraldSetup& setup,
                              double* success_probability) {
    setup.validate();
    const auto& p = joint.probs();
    std::vector<double> povm(static_cast<std::size_t>(p.cols()));
    for (std::size_t n = 0; n < povm.size(); ++n) povm[n] = herald_povm(setup, n);
    std::vector<double> weights(static_cast<std::size_t>(p.rows()), 0.0);
    double upsilon = 0.0;
    for (Eigen::Index a = 0; a < p.rows(); ++a) {
        for (Eigen::Index b = 0; b < p.cols(); ++b) weights[static_cast<std::size_t>(a)] += p(a, b) * povm[static_cast<std::size_t>(b)];
        upsilon += weights[static_cast<std::size_t>(a)];
    }
    if (!(upsilon > 0.0)) throw InvalidInput("herald success probability is zero");
    for (double& w : weights) w /= upsilon;
    if (success_probability) *success_probability = upsilon;
    return PhotonStatistics(std::move(weights), std::min(1.0, joint.tail_bound() / upsilon));
}

PairSource PairSource::single_mode() { return from_spectrum(SchmidtSpectrum::from_weights({1.0})); }

PairSource PairSource::multimode_limit() { return PairSource{}; }

PairSource PairSource::from_spectrum(SchmidtSpectrum spectrum) {
    PairSource s;
    s.spectrum_ = std::move(spectrum);
    return s;
}

double PairSource::inverse_mode_number() const { return spectrum_ ? spectrum_->sum_power(4) : 0.0; }

std::string PairSource::label() const {
    if (!spectrum_) return "MM";
    if (spectrum_->weights.size() == 1) return "SM";
    return "K=" + format_double(spectrum_->effective_mode_number());
}

double PairSource::car(double mean) const {
    if (!(mean > 0.0)) throw InvalidInput("mean photon number must be positive");
    if (!spectrum_) return 1.0 + 1.0 / mean;
    // Per mode the pair number is geometric with mean s_q = sinh^2(r_q), so
    // <n_s n_i> = sum_q (2 s_q^2 + s_q) + sum_{q != q'} s_q s_q'.
    const double b = strength_for_mean(*spectrum_, mean);
    double n = 0.0, s2 = 0.0;
    for (double l : spectrum_->weights) {
        const double s = std::pow(std::sinh(b * l), 2);
        n += s;
        s2 += s * s;
    }
    return 1.0 + 1.0 / n + s2 / (n * n);
}

JointPhotonStatistics PairSource::joint(double mean, double tail_tolerance) const {
    if (!spectrum_) {
        const PoissonState spec{mean};
        const std::size_t n_max = std::max<std::size_t>(8, required_n_max(spec, tail_tolerance));
        return JointPhotonStatistics::diagonal(make_state(spec, n_max, tail_tolerance));
    }
    return twin_beam_joint(*spectrum_, strength_for_mean(*spectrum_, mean), 8, tail_tolerance);
}

double PairSource::mean_for_car(double target) const {
    if (!std::isfinite(target) || target > car(kMinMean) || target < car(kMaxMean)) {
        throw InvalidInput("CAR " + format_double(target) + " is unattainable for source " + label() +
                           " (mean photon number limited to [1e-9, 20])");
    }
    // car(mean) is decreasing; bisect in log(mean).
    double lo = std::log(kMinMean), hi = std::log(kMaxMean);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (car(std::exp(mid)) > target ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

std::vector<HeraldPoint> g2h_curve(const PairSource& source, const std::vector<double>& cars,
                                   const HeraldSetup& setup, unsigned threads) {
    setup.validate();
    std::vector<HeraldPoint> points(cars.size());
    parallel_chunks(cars.size(), threads, [&](std::size_t i) {
        HeraldPoint& pt = points[i];
        pt.car = cars[i];
        pt.mean_photon_number = source.mean_for_car(cars[i]);
        const auto heralded = herald_state(source.joint(pt.mean_photon_number), setup, &pt.success_probability);
        pt.g2h = moments_from_statistics(heralded, 2).g(2);
    });
    return points;
}

void write_herald_curve_csv(std::ostream& out, const std::vector<HeraldPoint>& points) {
    out << "car,mean_photon_number,g2h,success_probability\n";
    for (const auto& p : points) {
        out << join_csv({format_double(p.car), format_double(p.mean_photon_number), format_double(p.g2h),
                         format_double(p.success_probability)})
            << '\n';
    }
}

// Nonclassicality -------------------------------------------------------------------

NonclassicalityVerdict twin_beam_nonclassicality(double g11, double g20, double g02, double sigma11, double sigma20,
                                                 double sigma02) {
    for (double x : {g11, g20, g02, sigma11, sigma20, sigma02})
        if (!std::isfinite(x) || x < 0.0) throw InvalidInput("moments and uncertainties must be finite and >= 0");
    const double bound = std::sqrt(g20 * g02);
    double sigma2 = sigma11 * sigma11;
    if (bound > 0.0) {
        sigma2 += std::pow(0.5 * g02 / bound * sigma20, 2) + std::pow(0.5 * g20 / bound * sigma02, 2);
    }
    return judge("cauchy-schwarz g11 > sqrt(g20 g02)", g11, bound - g11, std::sqrt(sigma2));
}

}  // namespace photocorr
