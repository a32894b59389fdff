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

#include "photocorr/tes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "photocorr/error.hpp"
#include "photocorr/format.hpp"
#include "photocorr/random.hpp"

namespace photocorr {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

// Little-endian helpers for the binary container.
template <typename T>
void put_le(std::ostream& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(bytes, sizeof(U));
}

template <typename T>
T get_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    unsigned char bytes[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw InvalidInput("TES1 file is truncated");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
    return std::bit_cast<T>(bits);
}

}  // namespace

// Traces -------------------------------------------------------------------------

void TesTraceSet::validate() const {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw InvalidInput("sample_rate must be positive");
    if (trace_length == 0) throw InvalidInput("trace_length must be positive");
    if (samples.size() % trace_length != 0) throw InvalidInput("sample count is not a multiple of trace_length");
}

void write_traces_csv(std::ostream& out, const TesTraceSet& traces) {
    traces.validate();
    if (traces.label.find('\n') != std::string::npos) throw InvalidInput("trace label must be one line");
    out << "# sample_rate=" << format_double(traces.sample_rate) << " label=" << traces.label << '\n';
    std::string row;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        row.clear();
        const auto t = traces.trace(i);
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (j) row += ',';
            row += format_float(t[j]);
        }
        out << row << '\n';
    }
}

TesTraceSet read_traces_csv(std::istream& in) {
    std::string line;
    const std::string prefix = "# sample_rate=";
    if (!std::getline(in, line) || line.rfind(prefix, 0) != 0)
        throw InvalidInput("trace CSV must start with '# sample_rate=<rate> label=<text>'");
    TesTraceSet set;
    const auto label_at = line.find(" label=");
    set.sample_rate = parse_double(std::string_view(line).substr(
        prefix.size(), label_at == std::string::npos ? std::string::npos : label_at - prefix.size()));
    if (label_at != std::string::npos) set.label = line.substr(label_at + 7);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (set.trace_length == 0) set.trace_length = fields.size();
        if (fields.size() != set.trace_length)
            throw InvalidInput("line " + std::to_string(line_no) + ": trace length differs from the first trace");
        for (auto f : fields) set.samples.push_back(parse_float(f));
    }
    set.validate();
    return set;
}

void write_traces_binary(std::ostream& out, const TesTraceSet& traces) {
    traces.validate();
    if (traces.size() > std::numeric_limits<std::uint32_t>::max() ||
        traces.trace_length > std::numeric_limits<std::uint32_t>::max())
        throw InvalidInput("trace set too large for the TES1 header");
    out.write("TES1", 4);
    put_le(out, static_cast<std::uint32_t>(traces.size()));
    put_le(out, static_cast<std::uint32_t>(traces.trace_length));
    put_le(out, traces.sample_rate);
    for (float s : traces.samples) put_le(out, s);
}

TesTraceSet read_traces_binary(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "TES1", 4) != 0) throw InvalidInput("missing TES1 magic");
    const auto count = get_le<std::uint32_t>(in);
    const auto length = get_le<std::uint32_t>(in);
    TesTraceSet set;
    set.sample_rate = get_le<double>(in);
    set.trace_length = length;
    set.samples.resize(static_cast<std::size_t>(count) * length);
    for (float& s : set.samples) s = get_le<float>(in);
    set.validate();
    return set;
}

std::vector<double> PulseTemplate::shape() const {
    if (onset >= length || !(rise > 0.0) || !(decay > rise) || !(area > 0.0))
        throw InvalidInput("pulse template needs onset < length, 0 < rise < decay and area > 0");
    std::vector<double> s(length, 0.0);
    double total = 0.0;
    for (std::size_t i = onset; i < length; ++i) {
        const double t = static_cast<double>(i - onset);
        s[i] = std::exp(-t / decay) - std::exp(-t / rise);
        total += s[i];
    }
    for (double& v : s) v *= area / total;
    return s;
}

namespace {

void check_window(const IntegrationWindow& w, std::size_t length) {
    if (w.end <= w.start) throw InvalidInput("integration window is empty");
    if (w.end > length) throw InvalidInput("integration window extends past the trace");
}

}  // namespace

double noise_sigma_for_resolution(const PulseTemplate& pulse, const IntegrationWindow& window, double ratio) {
    check_window(window, pulse.length);
    if (!(ratio > 0.0)) throw InvalidInput("resolution ratio must be positive");
    const auto shape = pulse.shape();
    double per_photon = 0.0;
    for (std::size_t i = window.start; i < window.end; ++i) per_photon += shape[i];
    const double w = static_cast<double>(window.end - window.start);
    const double p = static_cast<double>(window.start);
    const double variance_per_sigma2 = window.start > 0 ? w + w * w / p : w;
    return ratio * per_photon / (kFwhmPerSigma * std::sqrt(variance_per_sigma2));
}

TesTraceSet synthesize_traces(const PhotonStatistics& stats, const PulseTemplate& pulse, std::size_t count,
                              const SynthesisOptions& options) {
    if (options.noise_sigma < 0.0 || options.gain_jitter < 0.0) throw InvalidInput("noise parameters must be >= 0");
    const auto shape = pulse.shape();
    std::vector<double> cdf(stats.n_max() + 1);
    double acc = 0.0;
    for (std::size_t n = 0; n <= stats.n_max(); ++n) cdf[n] = (acc += stats[n]);
    TesTraceSet set;
    set.sample_rate = options.sample_rate;
    set.trace_length = pulse.length;
    set.samples.resize(count * pulse.length);
    set.validate();

    const std::size_t chunks = (count + kTracesPerChunk - 1) / kTracesPerChunk;
    parallel_chunks(chunks, options.threads, [&](std::size_t c) {
        Rng rng(options.seed, c);
        const std::size_t first = c * kTracesPerChunk;
        const std::size_t last = std::min(count, first + kTracesPerChunk);
        for (std::size_t i = first; i < last; ++i) {
            const double u = rng.uniform() * acc;
            const auto n = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            double height = 0.0;
            for (std::size_t k = 0; k < std::min(n, stats.n_max()); ++k)
                height += 1.0 + options.gain_jitter * rng.normal();
            float* out = set.samples.data() + i * pulse.length;
            for (std::size_t j = 0; j < pulse.length; ++j)
                out[j] = static_cast<float>(height * shape[j] + options.noise_sigma * rng.normal());
        }
    });
    return set;
}

std::vector<double> integrate_areas(const TesTraceSet& traces, const IntegrationWindow& window, unsigned threads) {
    traces.validate();
    check_window(window, traces.trace_length);
    std::vector<double> areas(traces.size());
    const std::size_t chunks = (areas.size() + kTracesPerChunk - 1) / kTracesPerChunk;
    parallel_chunks(chunks, threads, [&](std::size_t c) {
        const std::size_t last = std::min(areas.size(), (c + 1) * kTracesPerChunk);
        for (std::size_t i = c * kTracesPerChunk; i < last; ++i) {
            const auto t = traces.trace(i);
            double baseline = 0.0;
            for (std::size_t j = 0; j < window.start; ++j) baseline += t[j];
            if (window.start > 0) baseline /= static_cast<double>(window.start);
            double sum = 0.0;
            for (std::size_t j = window.start; j < window.end; ++j) sum += t[j] - baseline;
            areas[i] = sum;
        }
    });
    return areas;
}

// Histogram -------------------------------------------------------------------------

double AreaHistogram::total() const {
    double t = 0.0;
    for (double c : counts) t += c;
    return t;
}

void AreaHistogram::validate() const {
    if (counts.empty() || edges.size() != counts.size() + 1) throw InvalidInput("histogram needs bins + 1 edges");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        if (!(edges[i + 1] > edges[i])) throw InvalidInput("histogram edges must be strictly increasing");
    for (double c : counts)
        if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput("histogram counts must be finite and >= 0");
    if (total() <= 0.0) throw InvalidInput("histogram is empty");
}

AreaHistogram make_histogram(std::span<const double> areas, std::optional<double> bin_width) {
    if (areas.empty()) throw InvalidInput("no areas to histogram");
    std::vector<double> sorted(areas.begin(), areas.end());
    for (double a : sorted)
        if (!std::isfinite(a)) throw InvalidInput("non-finite area");
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front(), hi = sorted.back();
    double h;
    if (bin_width) {
        if (!(*bin_width > 0.0)) throw InvalidInput("bin width must be positive");
        h = *bin_width;
    } else {
        auto quantile = [&](double q) {
            const double pos = q * static_cast<double>(sorted.size() - 1);
            const auto i = static_cast<std::size_t>(pos);
            const double f = pos - static_cast<double>(i);
            return i + 1 < sorted.size() ? sorted[i] * (1 - f) + sorted[i + 1] * f : sorted[i];
        };
        const double iqr = quantile(0.75) - quantile(0.25);
        h = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
        if (!(h > 0.0)) h = hi > lo ? (hi - lo) / std::sqrt(static_cast<double>(sorted.size())) : 1.0;
    }
    const double span = hi - lo;
    const auto bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / h)));
    if (bins > 100000) throw InvalidInput("histogram would need more than 1e5 bins");
    AreaHistogram hist;
    const double start = span > 0.0 ? lo : lo - 0.5 * h;
    for (std::size_t i = 0; i <= bins; ++i) hist.edges.push_back(start + h * static_cast<double>(i));
    hist.counts.assign(bins, 0.0);
    for (double a : sorted) {
        auto b = static_cast<std::size_t>((a - start) / h);
        hist.counts[std::min(b, bins - 1)] += 1.0;
    }
    return hist;
}

// Mixture fit ---------------------------------------------------------------------------

namespace {

struct PeakShape {
    double events, beta, sigma;
};

// Expected counts per bin of sum_n events_n * N(beta_n, sigma_n^2).
Eigen::VectorXd expected_counts(const std::vector<PeakShape>& peaks, const AreaHistogram& hist) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hist.bins()));
    for (const auto& p : peaks) {
        const double s = std::abs(p.sigma) * std::numbers::sqrt2;
        double prev = std::erf((hist.edges[0] - p.beta) / s);
        for (std::size_t b = 0; b < hist.bins(); ++b) {
            const double next = std::erf((hist.edges[b + 1] - p.beta) / s);
            mu[static_cast<Eigen::Index>(b)] += p.events * 0.5 * (next - prev);
            prev = next;
        }
    }
    return mu;
}

constexpr double kMuFloor = 1e-12;

double deviance(const Eigen::VectorXd& mu, const AreaHistogram& hist) {
    double d = 0.0;
    for (std::size_t b = 0; b < hist.bins(); ++b) {
        const double m = std::max(mu[static_cast<Eigen::Index>(b)], kMuFloor);
        const double y = hist.counts[b];
        d += 2.0 * (m - y + (y > 0.0 ? y * std::log(y / m) : 0.0));
    }
    return d;
}

// Parameter vector <-> peak shapes. `events` entries are clipped at zero.
struct Model {
    std::function<std::vector<PeakShape>(const Eigen::VectorXd&)> unpack;
    std::vector<Eigen::Index> nonnegative;
};

Eigen::MatrixXd jacobian(const Model& model, const Eigen::VectorXd& p, const AreaHistogram& hist) {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(hist.bins()), p.size());
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
        Eigen::VectorXd up = p, down = p;
        up[k] += h;
        down[k] -= h;
        j.col(k) = (expected_counts(model.unpack(up), hist) - expected_counts(model.unpack(down), hist)) / (2 * h);
    }
    return j;
}

Eigen::MatrixXd fisher(const Eigen::MatrixXd& j, const Eigen::VectorXd& mu) {
    const Eigen::VectorXd w = mu.cwiseMax(kMuFloor).cwiseInverse();
    return j.transpose() * w.asDiagonal() * j;
}

struct LmResult {
    Eigen::VectorXd params;
    double deviance;
    std::size_t iterations;
};

LmResult levenberg_marquardt(const Model& model, Eigen::VectorXd p, const AreaHistogram& hist,
                             const FitOptions& options) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(hist.bins()));
    for (std::size_t b = 0; b < hist.bins(); ++b) y[static_cast<Eigen::Index>(b)] = hist.counts[b];
    Eigen::VectorXd mu = expected_counts(model.unpack(p), hist);
    double dev = deviance(mu, hist);
    double lambda = 1e-3;
    for (std::size_t it = 1; it <= options.max_iterations; ++it) {
        const Eigen::MatrixXd j = jacobian(model, p, hist);
        const Eigen::MatrixXd h = fisher(j, mu);
        // Gradient of the negative log-likelihood.
        const Eigen::VectorXd g = j.transpose() * (Eigen::VectorXd::Ones(mu.size()) - y.cwiseQuotient(mu.cwiseMax(kMuFloor)));
        bool improved = false;
        double new_dev = dev;
        for (int tries = 0; tries < 40 && !improved; ++tries) {
            Eigen::MatrixXd a = h;
            a.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
            Eigen::VectorXd candidate = p - a.ldlt().solve(g);
            for (auto k : model.nonnegative) candidate[k] = std::max(candidate[k], 0.0);
            const Eigen::VectorXd cmu = expected_counts(model.unpack(candidate), hist);
            const double cdev = deviance(cmu, hist);
            if (std::isfinite(cdev) && cdev <= dev) {
                improved = true;
                new_dev = cdev;
                p = candidate;
                mu = cmu;
                lambda = std::max(lambda / 10.0, 1e-12);
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved || dev - new_dev <= options.tolerance * std::max(1.0, dev)) {
            return {p, new_dev, it};
        }
        dev = new_dev;
    }
    throw ConvergenceError("mixture fit did not converge within " + std::to_string(options.max_iterations) +
                           " iterations");
}

// Local maxima of the 3-bin smoothed histogram, by descending prominence.
std::vector<std::size_t> prominent_maxima(const std::vector<double>& c) {
    const std::size_t n = c.size();
    std::vector<std::pair<double, std::size_t>> found;
    const double top = *std::max_element(c.begin(), c.end());
    for (std::size_t i = 0; i < n; ++i) {
        const double left = i > 0 ? c[i - 1] : -1.0;
        const double right = i + 1 < n ? c[i + 1] : -1.0;
        if (!(c[i] > left && c[i] >= right)) continue;
        double lmin = c[i], rmin = c[i];
        for (std::size_t j = i; j-- > 0 && c[j] <= c[i];) lmin = std::min(lmin, c[j]);
        for (std::size_t j = i + 1; j < n && c[j] <= c[i]; ++j) rmin = std::min(rmin, c[j]);
        const double prominence = c[i] - std::max(lmin, rmin);
        if (prominence >= std::max(3.0, 0.01 * top)) found.emplace_back(prominence, i);
    }
    std::stable_sort(found.begin(), found.end(), [](auto a, auto b) { return a.first > b.first; });
    std::vector<std::size_t> out;
    for (auto [p, i] : found) out.push_back(i);
    return out;
}

}  // namespace

MixtureFit fit_mixture(const AreaHistogram& hist, std::size_t n_peaks, const FitOptions& options) {
    hist.validate();
    if (n_peaks < 1) throw InvalidInput("n_peaks must be >= 1");
    const std::size_t bins = hist.bins();
    const double width = hist.edges[1] - hist.edges[0];
    auto center = [&](std::size_t b) { return 0.5 * (hist.edges[b] + hist.edges[b + 1]); };

    std::vector<double> smooth(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        double s = 0.0;
        int k = 0;
        for (std::size_t j = b > 0 ? b - 1 : 0; j <= std::min(bins - 1, b + 1); ++j, ++k) s += hist.counts[j];
        smooth[b] = s / k;
    }
    auto maxima = prominent_maxima(smooth);
    if (maxima.size() > n_peaks) maxima.resize(n_peaks);
    std::sort(maxima.begin(), maxima.end());

    // Spacing: median gap between maxima; one maximum is read as the n-th peak
    // above a vacuum at zero area; otherwise uniform spacing over the range.
    const double range = hist.edges.back() - hist.edges.front();
    double spacing;
    if (maxima.size() >= 2) {
        std::vector<double> gaps;
        for (std::size_t i = 1; i < maxima.size(); ++i) gaps.push_back(center(maxima[i]) - center(maxima[i - 1]));
        std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
        spacing = gaps[gaps.size() / 2];
    } else if (maxima.size() == 1 && std::abs(center(maxima[0])) > 3 * width) {
        spacing = std::abs(center(maxima[0]));
    } else {
        spacing = range / static_cast<double>(n_peaks);
    }
    spacing = std::max(spacing, width);
    double offset = hist.edges.front() + 0.5 * spacing;
    if (!maxima.empty()) {
        const double first = center(maxima[0]);
        offset = first - std::round(first / spacing) * spacing;
        if (n_peaks == 1) offset = first;
    }

    // Width from the half-maximum crossing of the tallest peak.
    const auto tallest = static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
    std::size_t lo = tallest, hi = tallest;
    while (lo > 0 && smooth[lo] > 0.5 * smooth[tallest]) --lo;
    while (hi + 1 < bins && smooth[hi] > 0.5 * smooth[tallest]) ++hi;
    double sigma0 = std::max(static_cast<double>(hi - lo) * width / kFwhmPerSigma, 0.5 * width);
    if (n_peaks > 1) sigma0 = std::min(sigma0, 0.5 * spacing);

    // Stage 1: shared law beta_n = b + n d, sigma_n^2 = u^2 + n v^2.
    const auto k = static_cast<Eigen::Index>(n_peaks);
    const bool shared = n_peaks >= 2;
    Eigen::VectorXd p(k + (shared ? 4 : 2));
    for (std::size_t n = 0; n < n_peaks; ++n) {
        const double beta = offset + spacing * static_cast<double>(n);
        double y = 0.0;
        if (beta >= hist.edges.front() && beta < hist.edges.back()) {
            y = smooth[std::min(bins - 1, static_cast<std::size_t>((beta - hist.edges.front()) / width))];
        }
        p[static_cast<Eigen::Index>(n)] = y * sigma0 * std::sqrt(2 * std::numbers::pi) / width;
    }
    p[k] = offset;
    if (shared) {
        p[k + 1] = spacing;
        p[k + 2] = sigma0;
        p[k + 3] = 0.1 * sigma0;
    } else {
        p[k + 1] = sigma0;
    }
    Model stage1;
    for (Eigen::Index i = 0; i < k; ++i) stage1.nonnegative.push_back(i);
    stage1.unpack = [k, shared](const Eigen::VectorXd& q) {
        std::vector<PeakShape> peaks(static_cast<std::size_t>(k));
        for (Eigen::Index n = 0; n < k; ++n) {
            const double dn = static_cast<double>(n);
            const double var = shared ? q[k + 2] * q[k + 2] + dn * q[k + 3] * q[k + 3] : q[k + 1] * q[k + 1];
            peaks[static_cast<std::size_t>(n)] = {q[n], shared ? q[k] + dn * q[k + 1] : q[k],
                                                  std::sqrt(std::max(var, 1e-300))};
        }
        return peaks;
    };
    auto first = levenberg_marquardt(stage1, p, hist, options);
    auto base = stage1.unpack(first.params);

    // Stage 2: well-populated peaks get their own center and width.
    std::vector<std::size_t> free;
    if (n_peaks >= 3)
        for (std::size_t n = 0; n < n_peaks; ++n)
            if (base[n].events >= options.min_free_events) free.push_back(n);
    const auto f = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd q(k + 2 * f);
    for (Eigen::Index n = 0; n < k; ++n) q[n] = base[static_cast<std::size_t>(n)].events;
    for (Eigen::Index i = 0; i < f; ++i) {
        q[k + 2 * i] = base[free[static_cast<std::size_t>(i)]].beta;
        q[k + 2 * i + 1] = base[free[static_cast<std::size_t>(i)]].sigma;
    }
    Model stage2;
    for (Eigen::Index i = 0; i < k; ++i) stage2.nonnegative.push_back(i);
    stage2.unpack = [k, f, base, free](const Eigen::VectorXd& x) {
        auto peaks = base;
        for (Eigen::Index n = 0; n < k; ++n) peaks[static_cast<std::size_t>(n)].events = x[n];
        for (Eigen::Index i = 0; i < f; ++i) {
            auto& pk = peaks[free[static_cast<std::size_t>(i)]];
            pk.beta = x[k + 2 * i];
            pk.sigma = std::abs(x[k + 2 * i + 1]);
        }
        return peaks;
    };
    auto second = levenberg_marquardt(stage2, q, hist, options);
    const auto shapes = stage2.unpack(second.params);

    MixtureFit fit;
    fit.iterations = first.iterations + second.iterations;
    for (std::size_t n = 0; n < n_peaks; ++n) {
        MixturePeak pk;
        pk.events = shapes[n].events;
        pk.beta = shapes[n].beta;
        pk.alpha = 1.0 / (2.0 * shapes[n].sigma * shapes[n].sigma);
        pk.gamma = pk.events * std::sqrt(pk.alpha / std::numbers::pi);
        pk.free_shape = std::find(free.begin(), free.end(), n) != free.end() || n_peaks <= 2;
        if (n > 0 && !(pk.beta > fit.peaks.back().beta))
            throw ConvergenceError("overlapping peaks: fitted centers are not strictly increasing at n=" +
                                   std::to_string(n));
        fit.peaks.push_back(pk);
    }
    const Eigen::VectorXd mu = expected_counts(shapes, hist);
    const Eigen::MatrixXd info = fisher(jacobian(stage2, second.params, hist), mu);
    const Eigen::MatrixXd cov = info.completeOrthogonalDecomposition().pseudoInverse();
    fit.events_covariance = cov.topLeftCorner(k, k);
    const auto params = static_cast<double>(first.params.size() + (second.params.size() - k));
    fit.residual = second.deviance / std::max(1.0, static_cast<double>(bins) - params);
    if (n_peaks >= 2) {
        fit.energy_resolution = kFwhmPerSigma * shapes[1].sigma / (shapes[1].beta - shapes[0].beta);
    }
    return fit;
}

StatisticsWithErrors extract_statistics(const MixtureFit& fit) {
    const std::size_t k = fit.peaks.size();
    if (k == 0) throw InvalidInput("fit has no peaks");
    Eigen::VectorXd a(static_cast<Eigen::Index>(k));
    for (std::size_t n = 0; n < k; ++n) a[static_cast<Eigen::Index>(n)] = fit.peaks[n].gamma * std::sqrt(std::numbers::pi / fit.peaks[n].alpha);
    const double total = a.sum();
    if (!(total > 0.0)) throw NumericalError("all fitted peak weights are zero");
    // d rho_n / d A_j = (delta_nj - rho_n) / total.
    const Eigen::VectorXd rho = a / total;
    Eigen::MatrixXd jac = -rho * Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(k));
    jac.diagonal().array() += 1.0;
    jac /= total;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    if (fit.events_covariance.rows() == static_cast<Eigen::Index>(k)) cov = jac * fit.events_covariance * jac.transpose();
    std::vector<double> probs(k), sigma(k);
    for (std::size_t n = 0; n < k; ++n) {
        probs[n] = rho[static_cast<Eigen::Index>(n)];
        sigma[n] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))));
    }
    return {PhotonStatistics::from_weights(std::move(probs)), std::move(sigma)};
}

MomentReport moments_with_mc_errors(const StatisticsWithErrors& stats, std::size_t m_max, std::size_t trials,
                                    std::uint64_t seed, unsigned threads) {
    const std::size_t n_max = stats.statistics.n_max();
    if (trials < 100) throw InvalidInput("need at least 100 Monte-Carlo trials");
    if (m_max < 1 || m_max > n_max) throw InvalidInput("m_max must lie in [1, n_max]");
    if (stats.sigma.size() != n_max + 1) throw InvalidInput("one error per photon-number bin is required");
    for (double s : stats.sigma)
        if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidInput("bin errors must be finite and >= 0");

    // Per-chunk Welford accumulators over (g^(0..m_max), mean), merged in order.
    struct Acc {
        std::size_t count = 0, discarded = 0;
        std::vector<double> mean, m2;
    };
    const std::size_t width = m_max + 2;
    const std::size_t chunks = (trials + kTrialsPerMcChunk - 1) / kTrialsPerMcChunk;
    std::vector<Acc> acc(chunks);
    parallel_chunks(chunks, threads, [&](std::size_t c) {
        Rng rng(seed, c);
        Acc& a = acc[c];
        a.mean.assign(width, 0.0);
        a.m2.assign(width, 0.0);
        std::vector<double> p(n_max + 1), x(width);
        const std::size_t last = std::min(trials, (c + 1) * kTrialsPerMcChunk);
        for (std::size_t t = c * kTrialsPerMcChunk; t < last; ++t) {
            double sum = 0.0;
            for (std::size_t n = 0; n <= n_max; ++n) {
                p[n] = std::max(0.0, stats.statistics[n] + stats.sigma[n] * rng.normal());
                sum += p[n];
            }
            double mean = 0.0;
            if (sum > 0.0)
                for (std::size_t n = 0; n <= n_max; ++n) mean += static_cast<double>(n) * p[n] / sum;
            if (!(mean > 0.0)) {
                ++a.discarded;
                continue;
            }
            x[0] = 1.0;
            for (std::size_t m = 1; m <= m_max; ++m) {
                double f = 0.0;
                for (std::size_t n = m; n <= n_max; ++n) {
                    double falling = 1.0;
                    for (std::size_t j = 0; j < m; ++j) falling *= static_cast<double>(n - j);
                    f += falling * p[n] / sum;
                }
                x[m] = m == 1 ? 1.0 : f / std::pow(mean, static_cast<double>(m));
            }
            x[m_max + 1] = mean;
            ++a.count;
            for (std::size_t i = 0; i < width; ++i) {
                const double d = x[i] - a.mean[i];
                a.mean[i] += d / static_cast<double>(a.count);
                a.m2[i] += d * (x[i] - a.mean[i]);
            }
        }
    });
    Acc total;
    total.mean.assign(width, 0.0);
    total.m2.assign(width, 0.0);
    for (const auto& a : acc) {
        total.discarded += a.discarded;
        if (a.count == 0) continue;
        const double na = static_cast<double>(total.count), nb = static_cast<double>(a.count);
        for (std::size_t i = 0; i < width; ++i) {
            const double d = a.mean[i] - total.mean[i];
            total.mean[i] += d * nb / (na + nb);
            total.m2[i] += a.m2[i] + d * d * na * nb / (na + nb);
        }
        total.count += a.count;
    }
    if (static_cast<double>(total.discarded) > 0.01 * static_cast<double>(trials)) {
        throw NumericalError(std::to_string(total.discarded) + " of " + std::to_string(trials) +
                             " Monte-Carlo trials had zero mean photon number (> 1%)");
    }
    std::vector<double> values(m_max + 1), sigmas(m_max + 1);
    for (std::size_t m = 0; m <= m_max; ++m) {
        values[m] = m <= 1 ? 1.0 : total.mean[m];
        sigmas[m] = m <= 1 || total.count < 2 ? 0.0 : std::sqrt(total.m2[m] / static_cast<double>(total.count - 1));
    }
    const double mean_sigma =
        total.count < 2 ? 0.0 : std::sqrt(total.m2[m_max + 1] / static_cast<double>(total.count - 1));
    return MomentReport::make(std::move(values), std::move(sigmas), total.mean[m_max + 1], mean_sigma,
                              MomentSource::kMonteCarlo);
}

}  // namespace photocorr
