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

#include "photocorr/detection.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "detection_json.hpp"
#include "json_util.hpp"
#include "photocorr/error.hpp"
#include "photocorr/format.hpp"
#include "photocorr/random.hpp"

namespace photocorr {

// Models ---------------------------------------------------------------------

void DetectorModel::validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
        throw InvalidInput("detector efficiency must lie in [0, 1], got " + format_double(efficiency));
    }
    if (!(dark_count >= 0.0 && dark_count < 1.0)) {
        throw InvalidInput("dark-count probability must lie in [0, 1), got " + std::to_string(dark_count));
    }
}

NetworkSpec NetworkSpec::balanced(std::size_t depth, const DetectorModel& detector) {
    NetworkSpec spec;
    spec.depth = depth;
    for (std::size_t s = 0; s <= depth; ++s) spec.transmissions.emplace_back(std::size_t{1} << s, 0.5);
    spec.detectors.assign(spec.outputs(), detector);
    spec.validate();
    return spec;
}

NetworkSpec NetworkSpec::hbt(double transmission, const DetectorModel& d1, const DetectorModel& d2) {
    NetworkSpec spec;
    spec.depth = 0;
    spec.transmissions = {{transmission}};
    spec.detectors = {d1, d2};
    spec.validate();
    return spec;
}

void NetworkSpec::validate() const {
    if (depth > 3) throw InvalidInput("network depth " + std::to_string(depth) + " exceeds 16 outputs");
    if (transmissions.size() != depth + 1) {
        throw InvalidInput("network of depth " + std::to_string(depth) + " needs " + std::to_string(depth + 1) +
                           " transmission stages, got " + std::to_string(transmissions.size()));
    }
    for (std::size_t s = 0; s <= depth; ++s) {
        if (transmissions[s].size() != (std::size_t{1} << s)) {
            throw InvalidInput("stage " + std::to_string(s) + " needs " + std::to_string(std::size_t{1} << s) +
                               " transmissions");
        }
        for (double t : transmissions[s]) {
            if (!(t > 0.0 && t < 1.0)) throw InvalidInput("transmissions must lie in (0, 1), got " + format_double(t));
        }
    }
    if (detectors.size() != outputs()) {
        throw InvalidInput("network needs " + std::to_string(outputs()) + " detectors, got " +
                           std::to_string(detectors.size()));
    }
    for (const auto& d : detectors) {
        d.validate();
        if (d.kind != DetectorKind::kClick) throw InvalidInput("network outputs must be click detectors");
    }
}

std::vector<double> NetworkSpec::path_probabilities() const {
    std::vector<double> probs{1.0};
    for (std::size_t s = 0; s <= depth; ++s) {
        std::vector<double> next(probs.size() * 2);
        for (std::size_t l = 0; l < probs.size(); ++l) {
            next[2 * l] = probs[l] * transmissions[s][l];
            next[2 * l + 1] = probs[l] * (1.0 - transmissions[s][l]);
        }
        probs.swap(next);
    }
    return probs;
}

// ClickRecord ----------------------------------------------------------------

void ClickRecord::validate() const {
    if (detectors == 0 || detectors > NetworkSpec::kMaxOutputs) throw InvalidInput("detector count must be 1..16");
    if (counts.size() != (std::size_t{1} << detectors)) {
        throw InvalidInput("click record needs 2^detectors pattern counts");
    }
    const auto total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    if (total != trials) throw InvalidInput("pattern counts do not sum to the number of trials");
    if (trials == 0) throw InvalidInput("click record has no trials");
}

std::vector<double> ClickRecord::click_number_distribution() const {
    std::vector<double> out(detectors + 1, 0.0);
    for (std::size_t p = 0; p < counts.size(); ++p) {
        out[static_cast<std::size_t>(std::popcount(p))] += static_cast<double>(counts[p]);
    }
    for (double& v : out) v /= static_cast<double>(trials);
    return out;
}

double ClickRecord::marginal(std::size_t detector) const {
    if (detector >= detectors) throw InvalidInput("detector index out of range");
    std::uint64_t hits = 0;
    for (std::size_t p = 0; p < counts.size(); ++p)
        if (p >> detector & 1U) hits += counts[p];
    return static_cast<double>(hits) / static_cast<double>(trials);
}

// Simulation -----------------------------------------------------------------

ClickRecord simulate_network(const PhotonStatistics& input, const NetworkSpec& spec, std::uint64_t trials,
                             const SimulationOptions& options) {
    spec.validate();
    if (trials == 0) throw InvalidInput("trials must be >= 1");
    const std::size_t outputs = spec.outputs();

    // Photon-number CDF (renormalized over the represented range).
    std::vector<double> cdf(input.n_max() + 1);
    std::partial_sum(input.probs().begin(), input.probs().end(), cdf.begin());
    const double total = cdf.back();
    for (double& c : cdf) c /= total;
    cdf.back() = 1.0;

    // Per-photon destination: output o and detected, or lost.
    const auto paths = spec.path_probabilities();
    std::vector<double> dest_cdf(outputs);
    double acc = 0.0;
    for (std::size_t o = 0; o < outputs; ++o) {
        acc += paths[o] * spec.detectors[o].efficiency;
        dest_cdf[o] = acc;
    }
    std::vector<std::pair<std::size_t, double>> dark;
    for (std::size_t o = 0; o < outputs; ++o)
        if (spec.detectors[o].dark_count > 0.0) dark.emplace_back(o, spec.detectors[o].dark_count);

    const std::uint64_t chunks = (trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
    std::vector<std::vector<std::uint64_t>> partial(chunks, std::vector<std::uint64_t>(std::size_t{1} << outputs, 0));
    parallel_chunks(chunks, options.threads, [&](std::size_t c) {
        Rng rng(options.seed, c);
        auto& counts = partial[c];
        const std::uint64_t begin = c * kTrialsPerChunk;
        const std::uint64_t end = std::min(trials, begin + kTrialsPerChunk);
        for (std::uint64_t t = begin; t < end; ++t) {
            const double u = rng.uniform();
            std::size_t n = 0;
            while (cdf[n] <= u && n + 1 < cdf.size()) ++n;
            std::size_t pattern = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double v = rng.uniform();
                if (v >= acc) continue;  // lost
                std::size_t o = 0;
                while (dest_cdf[o] <= v) ++o;
                pattern |= std::size_t{1} << o;
            }
            for (const auto& [o, p] : dark)
                if (rng.bernoulli(p)) pattern |= std::size_t{1} << o;
            ++counts[pattern];
        }
    });

    ClickRecord record;
    record.detectors = outputs;
    record.trials = trials;
    record.counts.assign(std::size_t{1} << outputs, 0);
    for (const auto& part : partial)
        for (std::size_t p = 0; p < part.size(); ++p) record.counts[p] += part[p];
    return record;
}

// Estimators -----------------------------------------------------------------

namespace {

std::vector<double> marginals(const ClickRecord& record) {
    std::vector<double> out(record.detectors);
    for (std::size_t o = 0; o < record.detectors; ++o) out[o] = record.marginal(o);
    return out;
}

// Elementary symmetric polynomials e_0..e_m of xs.
std::vector<double> elementary_symmetric(const std::vector<double>& xs, std::size_t m) {
    std::vector<double> e(m + 1, 0.0);
    e[0] = 1.0;
    for (double x : xs)
        for (std::size_t j = m; j >= 1; --j) e[j] += x * e[j - 1];
    return e;
}

double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (std::size_t j = 0; j < k; ++j) r = r * static_cast<double>(n - j) / static_cast<double>(j + 1);
    return r;
}

// Delta-method estimate of mean(Y) / denom with influence
// Z_p = Y_p / denom - ratio * sum_o grad_o X_{p,o} / denom.
CountEstimate ratio_estimate(const ClickRecord& record, const std::vector<double>& y, double denom,
                             const std::vector<double>& grad) {
    const double trials = static_cast<double>(record.trials);
    double num = 0.0;
    std::uint64_t events = 0;
    for (std::size_t p = 0; p < record.counts.size(); ++p) {
        num += y[p] * static_cast<double>(record.counts[p]);
        if (y[p] != 0.0) events += record.counts[p];
    }
    num /= trials;
    const double ratio = num / denom;
    double mean_z = 0.0;
    double mean_z2 = 0.0;
    for (std::size_t p = 0; p < record.counts.size(); ++p) {
        if (record.counts[p] == 0) continue;
        double lin = 0.0;
        for (std::size_t o = 0; o < record.detectors; ++o)
            if (p >> o & 1U) lin += grad[o];
        const double z = (y[p] - ratio * lin) / denom;
        const double w = static_cast<double>(record.counts[p]) / trials;
        mean_z += w * z;
        mean_z2 += w * z * z;
    }
    const double var = std::max(0.0, mean_z2 - mean_z * mean_z);
    return {ratio, std::sqrt(var / trials), record.trials, events};
}

}  // namespace

CountEstimate estimate_gm_mfold(const ClickRecord& record, const std::vector<std::size_t>& chosen) {
    record.validate();
    if (chosen.empty()) throw InvalidInput("choose at least one detector");
    if (chosen.size() > record.detectors) throw InvalidInput("m exceeds the number of detectors");
    std::size_t mask = 0;
    for (std::size_t o : chosen) {
        if (o >= record.detectors) throw InvalidInput("detector index " + std::to_string(o) + " out of range");
        if (mask >> o & 1U) throw InvalidInput("detector " + std::to_string(o) + " chosen twice");
        mask |= std::size_t{1} << o;
    }
    const auto p = marginals(record);
    double denom = 1.0;
    for (std::size_t o : chosen) {
        if (p[o] == 0.0) throw InvalidInput("detector " + std::to_string(o) + " never clicked");
        denom *= p[o];
    }
    std::vector<double> y(record.counts.size());
    for (std::size_t pat = 0; pat < y.size(); ++pat) y[pat] = (pat & mask) == mask ? 1.0 : 0.0;
    // d(prod P)/dP_o = denom / P_o.
    std::vector<double> grad(record.detectors, 0.0);
    for (std::size_t o : chosen) grad[o] = denom / p[o];
    return ratio_estimate(record, y, denom, grad);
}

CountEstimate estimate_g2_hbt(const ClickRecord& record) {
    if (record.detectors != 2) throw InvalidInput("HBT estimate needs a two-detector record");
    return estimate_gm_mfold(record, {0, 1});
}

CountEstimate estimate_gm_pooled(const ClickRecord& record, std::size_t m) {
    record.validate();
    if (m == 0 || m > record.detectors) throw InvalidInput("m must lie in 1..detectors");
    const auto p = marginals(record);
    for (std::size_t o = 0; o < p.size(); ++o)
        if (p[o] == 0.0) throw InvalidInput("detector " + std::to_string(o) + " never clicked");
    const double denom = elementary_symmetric(p, m)[m];
    std::vector<double> grad(record.detectors);
    for (std::size_t o = 0; o < record.detectors; ++o) {
        auto others = p;
        others.erase(others.begin() + static_cast<std::ptrdiff_t>(o));
        grad[o] = elementary_symmetric(others, m - 1)[m - 1];
    }
    std::vector<double> y(record.counts.size());
    for (std::size_t pat = 0; pat < y.size(); ++pat) {
        y[pat] = binomial(static_cast<std::size_t>(std::popcount(pat)), m);
    }
    return ratio_estimate(record, y, denom, grad);
}

// Convolution ----------------------------------------------------------------

Eigen::MatrixXd convolution_matrix(std::size_t bins, double efficiency, std::size_t n_max) {
    if (bins == 0) throw InvalidInput("bins must be >= 1");
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw InvalidInput("efficiency must lie in [0, 1]");
    const double nb = static_cast<double>(bins);
    // occ(j, k): j surviving photons occupy exactly k of the bins.
    Eigen::MatrixXd occ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_max + 1), static_cast<Eigen::Index>(bins + 1));
    occ(0, 0) = 1.0;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n_max); ++j) {
        for (Eigen::Index k = 0; k <= static_cast<Eigen::Index>(bins); ++k) {
            const double v = occ(j, k);
            if (v == 0.0) continue;
            occ(j + 1, k) += v * static_cast<double>(k) / nb;
            if (k < static_cast<Eigen::Index>(bins)) occ(j + 1, k + 1) += v * (nb - static_cast<double>(k)) / nb;
        }
    }
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bins + 1), static_cast<Eigen::Index>(n_max + 1));
    std::vector<double> thin(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) {
        // Binomial(n, eta) survivors, by the multiplicative recurrence on j.
        std::fill(thin.begin(), thin.end(), 0.0);
        if (efficiency == 0.0) {
            thin[0] = 1.0;
        } else if (efficiency == 1.0) {
            thin[n] = 1.0;
        } else {
            const double log_q = std::log1p(-efficiency);
            const double log_ratio = std::log(efficiency) - log_q;
            for (std::size_t j = 0; j <= n; ++j) {
                const double lb = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(j) + 1) -
                                  std::lgamma(static_cast<double>(n - j) + 1);
                thin[j] = std::exp(lb + static_cast<double>(n) * log_q + static_cast<double>(j) * log_ratio);
            }
        }
        for (std::size_t j = 0; j <= n; ++j) {
            if (thin[j] == 0.0) continue;
            c.col(static_cast<Eigen::Index>(n)) += thin[j] * occ.row(static_cast<Eigen::Index>(j)).transpose();
        }
    }
    return c;
}

std::vector<double> convolve_statistics(const PhotonStatistics& input, std::size_t bins, double efficiency) {
    const Eigen::MatrixXd c = convolution_matrix(bins, efficiency, input.n_max());
    const Eigen::Map<const Eigen::VectorXd> rho(input.probs().data(), static_cast<Eigen::Index>(input.probs().size()));
    const Eigen::VectorXd k = c * rho;
    return {k.data(), k.data() + k.size()};
}

DeconvolutionResult deconvolve_statistics(const std::vector<double>& clicks, std::size_t bins, double efficiency,
                                          std::size_t n_max, const DeconvolutionOptions& options) {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw InvalidInput("deconvolution needs efficiency in (0, 1]");
    if (clicks.size() != bins + 1) {
        throw InvalidInput("click distribution must have bins + 1 = " + std::to_string(bins + 1) + " entries");
    }
    for (double v : clicks)
        if (!std::isfinite(v) || v < 0.0) throw InvalidInput("click probabilities must be finite and >= 0");
    const Eigen::MatrixXd c = convolution_matrix(bins, efficiency, n_max);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double smallest = s(s.size() - 1);
    const double cond = smallest > 0.0 ? s(0) / smallest : std::numeric_limits<double>::infinity();
    if (n_max > bins || !(cond <= options.max_condition)) {
        throw IllConditionedError("click convolution with bins=" + std::to_string(bins) + ", n_max=" +
                                      std::to_string(n_max) + " is ill-conditioned (condition number " +
                                      format_double(cond) + ")",
                                  cond);
    }
    const Eigen::Map<const Eigen::VectorXd> k(clicks.data(), static_cast<Eigen::Index>(clicks.size()));
    const Eigen::VectorXd x = svd.solve(k);
    const double residual = (c * x - k).norm();
    if (!(residual <= options.max_residual)) {
        throw ConvergenceError("deconvolution residual " + format_double(residual) + " exceeds tolerance " +
                               format_double(options.max_residual));
    }
    DeconvolutionResult result;
    result.raw_solution.assign(x.data(), x.data() + x.size());
    result.residual = residual;
    result.condition_number = cond;
    std::vector<double> clipped(result.raw_solution);
    for (double& v : clipped) {
        if (v < 0.0) {
            result.clipped_mass += -v;
            v = 0.0;
        }
    }
    const double total = std::accumulate(clipped.begin(), clipped.end(), 0.0);
    if (!(total > 0.0)) throw NumericalError("deconvolved distribution has no positive mass");
    result.statistics = PhotonStatistics::from_weights(std::move(clipped));
    return result;
}

namespace {

// g = (w.c) / (u.c)^m for click probabilities c estimated from `trials`
// windows, with multinomial delta-method error.
CountEstimate linear_moment_ratio(const Eigen::VectorXd& c, const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                                  std::size_t m, std::uint64_t trials) {
    const double f1 = u.dot(c);
    if (!(f1 > 0.0)) throw InvalidInput("mean photon number estimate is not positive");
    const double fm = w.dot(c);
    const double g = fm / std::pow(f1, static_cast<double>(m));
    const Eigen::VectorXd grad = w / std::pow(f1, static_cast<double>(m)) - (static_cast<double>(m) * g / f1) * u;
    // grad^T (diag(c) - c c^T) grad / T
    const double var = (grad.array().square() * c.array()).sum() - std::pow(grad.dot(c), 2);
    const double t = static_cast<double>(trials);
    return {g, std::sqrt(std::max(0.0, var) / t), trials, 0};
}

Eigen::VectorXd falling(std::size_t size, std::size_t m) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(size));
    for (std::size_t n = 0; n < size; ++n) {
        double f = 1.0;
        for (std::size_t j = 0; j < m; ++j) f *= static_cast<double>(n) - static_cast<double>(j);
        v(static_cast<Eigen::Index>(n)) = f;
    }
    return v;
}

Eigen::VectorXd click_vector(const ClickRecord& record) {
    const auto dist = record.click_number_distribution();
    return Eigen::Map<const Eigen::VectorXd>(dist.data(), static_cast<Eigen::Index>(dist.size()));
}

}  // namespace

CountEstimate estimate_gm_deconvolved(const ClickRecord& record, double efficiency, std::size_t m) {
    record.validate();
    if (m == 0 || m > record.detectors) throw InvalidInput("m must lie in 1..detectors");
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw InvalidInput("efficiency must lie in (0, 1]");
    const std::size_t bins = record.detectors;
    const Eigen::MatrixXd conv = convolution_matrix(bins, efficiency, bins);
    const Eigen::MatrixXd inverse = conv.fullPivLu().inverse();
    const Eigen::VectorXd u = inverse.transpose() * falling(bins + 1, 1);
    const Eigen::VectorXd w = inverse.transpose() * falling(bins + 1, m);
    auto est = linear_moment_ratio(click_vector(record), u, w, m, record.trials);
    for (std::size_t p = 0; p < record.counts.size(); ++p)
        if (static_cast<std::size_t>(std::popcount(p)) >= m) est.events += record.counts[p];
    return est;
}

CountEstimate estimate_gm_raw_clicks(const ClickRecord& record, std::size_t m) {
    record.validate();
    if (m == 0 || m > record.detectors) throw InvalidInput("m must lie in 1..detectors");
    const std::size_t size = record.detectors + 1;
    auto est = linear_moment_ratio(click_vector(record), falling(size, 1), falling(size, m), m, record.trials);
    for (std::size_t p = 0; p < record.counts.size(); ++p)
        if (static_cast<std::size_t>(std::popcount(p)) >= m) est.events += record.counts[p];
    return est;
}

// Serialization --------------------------------------------------------------

void write_click_record_csv(std::ostream& out, const ClickRecord& record) {
    record.validate();
    out << "# detectors=" << record.detectors << " trials=" << record.trials << "\n";
    out << "pattern,count\n";
    for (std::size_t p = 0; p < record.counts.size(); ++p) out << p << ',' << record.counts[p] << '\n';
}

namespace {

std::uint64_t parse_u64(std::string_view text, const std::string& what) {
    std::uint64_t v = 0;
    while (!text.empty() && (text.back() == '\r' || text.back() == ' ')) text.remove_suffix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw InvalidInput(what + ": expected an unsigned integer, got '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace

ClickRecord read_click_record_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# detectors=", 0) != 0) {
        throw InvalidInput("click CSV: missing '# detectors=D trials=T' header");
    }
    ClickRecord record;
    {
        std::istringstream header(line.substr(2));
        std::string a, b;
        header >> a >> b;
        if (a.rfind("detectors=", 0) != 0 || b.rfind("trials=", 0) != 0) throw InvalidInput("click CSV: malformed header");
        record.detectors = parse_u64(std::string_view(a).substr(10), "click CSV detectors");
        record.trials = parse_u64(std::string_view(b).substr(7), "click CSV trials");
    }
    if (record.detectors == 0 || record.detectors > NetworkSpec::kMaxOutputs) {
        throw InvalidInput("click CSV: detector count must be 1..16");
    }
    if (!std::getline(in, line) || line.rfind("pattern,count", 0) != 0) throw InvalidInput("click CSV: missing column header");
    record.counts.assign(std::size_t{1} << record.detectors, 0);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const std::string where = "click CSV row " + std::to_string(row + 3);
        if (fields.size() != 2) throw InvalidInput(where + ": expected 2 fields");
        const auto pattern = parse_u64(fields[0], where);
        if (pattern >= record.counts.size()) throw InvalidInput(where + ": pattern out of range");
        record.counts[pattern] = parse_u64(fields[1], where);
        ++row;
    }
    record.validate();
    return record;
}

std::string click_record_to_json(const ClickRecord& record) {
    record.validate();
    detail::Json j;
    j["detectors"] = record.detectors;
    j["trials"] = record.trials;
    j["counts"] = record.counts;
    return j.dump();
}

ClickRecord click_record_from_json(const std::string& text) {
    using namespace detail;
    const Json j = parse_json(text, "click record");
    check_keys(j, "", {"detectors", "trials", "counts"});
    ClickRecord record;
    record.detectors = as_uint(require(j, "", "detectors"), "detectors");
    record.trials = as_uint(require(j, "", "trials"), "trials");
    const Json& counts = require(j, "", "counts");
    if (!counts.is_array()) fail("counts", "expected an array");
    for (std::size_t i = 0; i < counts.size(); ++i) record.counts.push_back(as_uint(counts[i], index("counts", i)));
    record.validate();
    return record;
}

DetectorModel detail::detector_from_json_value(const Json& j, const std::string& path) {
    check_keys(j, path, {"kind", "efficiency", "dark_count"});
    DetectorModel d;
    const std::string kind = string_or(j, path, "kind", "click");
    if (kind == "click") {
        d.kind = DetectorKind::kClick;
    } else if (kind == "pnr") {
        d.kind = DetectorKind::kPnr;
    } else {
        fail(child(path, "kind"), "expected \"click\" or \"pnr\"");
    }
    d.efficiency = number_or(j, path, "efficiency", 1.0);
    if (!(d.efficiency >= 0.0 && d.efficiency <= 1.0)) fail(child(path, "efficiency"), "must lie in [0, 1]");
    d.dark_count = number_or(j, path, "dark_count", 0.0);
    if (!(d.dark_count >= 0.0 && d.dark_count < 1.0)) fail(child(path, "dark_count"), "must lie in [0, 1)");
    return d;
}

NetworkSpec detail::network_spec_from_json_value(const Json& j, const std::string& path) {
    check_keys(j, path, {"depth", "transmissions", "detectors"});
    NetworkSpec spec;
    spec.depth = as_uint(require(j, path, "depth"), child(path, "depth"));
    if (spec.depth > 3) fail(child(path, "depth"), "at most 3 (16 outputs)");
    if (auto it = j.find("transmissions"); it != j.end()) {
        const std::string tpath = child(path, "transmissions");
        if (!it->is_array() || it->size() != spec.depth + 1) {
            fail(tpath, "expected " + std::to_string(spec.depth + 1) + " stages");
        }
        for (std::size_t s = 0; s <= spec.depth; ++s) {
            const Json& stage = (*it)[s];
            const std::string spath = index(tpath, s);
            if (!stage.is_array() || stage.size() != (std::size_t{1} << s)) {
                fail(spath, "expected " + std::to_string(std::size_t{1} << s) + " transmissions");
            }
            std::vector<double> row;
            for (std::size_t l = 0; l < stage.size(); ++l) {
                const double t = as_number(stage[l], index(spath, l));
                if (!(t > 0.0 && t < 1.0)) fail(index(spath, l), "must lie in (0, 1)");
                row.push_back(t);
            }
            spec.transmissions.push_back(std::move(row));
        }
    } else {
        for (std::size_t s = 0; s <= spec.depth; ++s) spec.transmissions.emplace_back(std::size_t{1} << s, 0.5);
    }
    const std::string dpath = child(path, "detectors");
    auto dit = j.find("detectors");
    if (dit == j.end()) {
        spec.detectors.assign(spec.outputs(), DetectorModel{});
    } else if (dit->is_object()) {
        spec.detectors.assign(spec.outputs(), detector_from_json_value(*dit, dpath));
    } else if (dit->is_array()) {
        if (dit->size() != spec.outputs()) fail(dpath, "expected " + std::to_string(spec.outputs()) + " detectors");
        for (std::size_t o = 0; o < dit->size(); ++o) spec.detectors.push_back(detector_from_json_value((*dit)[o], index(dpath, o)));
    } else {
        fail(dpath, "expected a detector object or an array of them");
    }
    for (std::size_t o = 0; o < spec.detectors.size(); ++o) {
        if (spec.detectors[o].kind != DetectorKind::kClick) fail(index(dpath, o), "network outputs must be click detectors");
    }
    spec.validate();
    return spec;
}

NetworkSpec network_spec_from_json(const std::string& text) {
    return detail::network_spec_from_json_value(detail::parse_json(text, "network spec"), "");
}

std::string network_spec_to_json(const NetworkSpec& spec) {
    spec.validate();
    detail::Json j;
    j["depth"] = spec.depth;
    j["transmissions"] = spec.transmissions;
    detail::Json dets = detail::Json::array();
    for (const auto& d : spec.detectors) {
        dets.push_back({{"kind", d.kind == DetectorKind::kClick ? "click" : "pnr"},
                        {"efficiency", d.efficiency},
                        {"dark_count", d.dark_count}});
    }
    j["detectors"] = dets;
    return j.dump();
}

}  // namespace photocorr
