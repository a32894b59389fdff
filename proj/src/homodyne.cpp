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

#include "photocorr/homodyne.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "photocorr/error.hpp"
#include "photocorr/format.hpp"
#include "photocorr/random.hpp"

namespace photocorr {

namespace {

constexpr std::size_t kMaxTransferOrder = 12;

template <typename Visit>
void generate_chunk(const QuadratureSource& source, Rng& rng, std::uint64_t count, Visit&& visit) {
    if (source.kind == QuadratureStateKind::kCoherent) {
        const double amplitude = 2.0 * std::sqrt(source.mean);
        for (std::uint64_t i = 0; i < count; ++i) {
            const double theta = 2.0 * std::numbers::pi * rng.uniform();
            visit(amplitude * std::cos(theta) + rng.normal());
        }
    } else {
        const double width = std::sqrt(2.0 * source.mean + 1.0);
        for (std::uint64_t i = 0; i < count; ++i) visit(width * rng.normal());
    }
}

double factorial(std::size_t n) { return std::tgamma(static_cast<double>(n) + 1.0); }

// Power sums sum q^(2k), k = 0..K, of one generated block.
std::vector<double> block_power_sums(const QuadratureSource& source, std::uint64_t count, std::uint64_t seed,
                                     std::size_t k_max) {
    const std::uint64_t chunks = (count + kQuadraturesPerChunk - 1) / kQuadraturesPerChunk;
    std::vector<double> total(k_max + 1, 0.0);
    for (std::uint64_t c = 0; c < chunks; ++c) {
        Rng rng(seed, c);
        const std::uint64_t n = std::min(kQuadraturesPerChunk, count - c * kQuadraturesPerChunk);
        std::vector<double> part(k_max + 1, 0.0);
        generate_chunk(source, rng, n, [&](double q) {
            const double q2 = q * q;
            double p = 1.0;
            for (std::size_t k = 0; k <= k_max; ++k) {
                part[k] += p;
                p *= q2;
            }
        });
        for (std::size_t k = 0; k <= k_max; ++k) total[k] += part[k];
    }
    return total;
}

HomodyneMoments aggregate(std::vector<std::vector<double>> block_values, std::vector<double> block_means,
                          std::size_t m_max, std::uint64_t samples_per_block, MomentSource source) {
    const std::size_t blocks = block_values.size();
    const double b = static_cast<double>(blocks);
    std::vector<double> mean(m_max + 1, 0.0);
    std::vector<double> sd(m_max + 1, 0.0);
    for (const auto& row : block_values)
        for (std::size_t m = 0; m <= m_max; ++m) mean[m] += row[m] / b;
    for (const auto& row : block_values)
        for (std::size_t m = 0; m <= m_max; ++m) sd[m] += (row[m] - mean[m]) * (row[m] - mean[m]) / (b - 1.0);
    for (double& v : sd) v = std::sqrt(v);
    double n_mean = 0.0;
    double n_var = 0.0;
    for (double v : block_means) n_mean += v / b;
    for (double v : block_means) n_var += (v - n_mean) * (v - n_mean) / (b - 1.0);

    HomodyneMoments out;
    mean[0] = mean[1] = 1.0;
    sd[0] = sd[1] = 0.0;
    out.report = MomentReport::make(mean, sd, n_mean, std::sqrt(n_var), source);
    out.standard_error.resize(m_max + 1);
    for (std::size_t m = 0; m <= m_max; ++m) out.standard_error[m] = sd[m] / std::sqrt(b);
    out.block_values = std::move(block_values);
    out.samples_per_block = samples_per_block;
    return out;
}

}  // namespace

std::string QuadratureSource::label() const {
    return std::string(kind == QuadratureStateKind::kCoherent ? "coherent" : "thermal") + ":" + format_double(mean);
}

void QuadratureSource::validate() const {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw InvalidInput("mean photon number must be finite and >= 0");
}

QuadratureBatch sample_quadratures(const QuadratureSource& source, std::uint64_t count, std::uint64_t seed,
                                   unsigned threads) {
    source.validate();
    if (count == 0) throw InvalidInput("sample count must be >= 1");
    QuadratureBatch batch;
    batch.samples.resize(count);
    batch.label = source.label();
    batch.seed = seed;
    const std::uint64_t chunks = (count + kQuadraturesPerChunk - 1) / kQuadraturesPerChunk;
    parallel_chunks(chunks, threads, [&](std::size_t c) {
        Rng rng(seed, c);
        const std::uint64_t begin = c * kQuadraturesPerChunk;
        const std::uint64_t n = std::min(kQuadraturesPerChunk, count - begin);
        double* out = batch.samples.data() + begin;
        generate_chunk(source, rng, n, [&](double q) { *out++ = q; });
    });
    return batch;
}

TransferMatrix build_transfer_matrix(std::size_t k_max) {
    if (k_max > kMaxTransferOrder) throw InvalidInput("transfer matrix order limited to 12");
    const auto dim = static_cast<Eigen::Index>(k_max + 1);
    TransferMatrix t{Eigen::MatrixXd::Zero(dim, dim)};
    for (std::size_t k = 0; k <= k_max; ++k) {
        for (std::size_t m = 0; m <= k; ++m) {
            t.c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) =
                factorial(2 * k) / (factorial(k - m) * factorial(m) * factorial(m) * std::ldexp(1.0, static_cast<int>(k - m)));
        }
    }

    // Self-check: Fock expectations of (a + a^dag)^2k, which are phase independent.
    constexpr std::size_t kCheckFock = 10;
    const auto size = static_cast<Eigen::Index>(kCheckFock + k_max + 2);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index n = 1; n < size; ++n) x(n - 1, n) = x(n, n - 1) = std::sqrt(static_cast<double>(n));
    const Eigen::MatrixXd x2 = x * x;
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(size, size);
    for (std::size_t k = 0; k <= k_max; ++k) {
        for (std::size_t n = 0; n <= kCheckFock; ++n) {
            double predicted = 0.0;
            double falling = 1.0;
            for (std::size_t m = 0; m <= std::min(k, n); ++m) {
                predicted += t(k, m) * falling;
                falling *= static_cast<double>(n - m);
            }
            const double actual = power(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            if (std::abs(predicted - actual) > 1e-8 * std::abs(actual)) {
                throw NumericalError("transfer matrix fails Fock check at k=" + std::to_string(k) +
                                     ", n=" + std::to_string(n));
            }
        }
        power = power * x2;
    }
    return t;
}

std::vector<double> factorial_moments_from_quadrature_moments(const TransferMatrix& t,
                                                              const std::vector<double>& even_moments) {
    if (even_moments.empty() || even_moments.size() > t.k_max() + 1) {
        throw InvalidInput("need between 1 and k_max + 1 even moments");
    }
    std::vector<double> f(even_moments.size());
    for (std::size_t k = 0; k < even_moments.size(); ++k) {
        double rest = even_moments[k];
        for (std::size_t m = 0; m < k; ++m) rest -= t(k, m) * f[m];
        f[k] = rest / t(k, k);
    }
    return f;
}

std::vector<double> normalized_moments_from_quadrature_moments(const TransferMatrix& t,
                                                               const std::vector<double>& even_moments) {
    auto f = factorial_moments_from_quadrature_moments(t, even_moments);
    if (f.size() < 2 || !(f[1] > 0.0)) {
        throw NumericalError("estimated <:N:> is not positive; signal indistinguishable from vacuum");
    }
    std::vector<double> g(f.size());
    g[0] = 1.0;
    for (std::size_t m = 1; m < f.size(); ++m) g[m] = f[m] / std::pow(f[1], static_cast<double>(m));
    g[1] = 1.0;
    return g;
}

HomodyneMoments moments_from_quadratures(const QuadratureBatch& batch, std::size_t m_max, std::size_t block_count) {
    if (block_count < 2) throw InvalidInput("at least two blocks are needed for error bars");
    if (m_max < 1) throw InvalidInput("m_max must be >= 1");
    const std::uint64_t per_block = batch.samples.size() / block_count;
    if (per_block < 2) throw InvalidInput("blocks need at least two samples");
    const auto t = build_transfer_matrix(m_max);
    std::vector<std::vector<double>> values;
    std::vector<double> means;
    for (std::size_t b = 0; b < block_count; ++b) {
        std::vector<double> sums(m_max + 1, 0.0);
        for (std::uint64_t i = b * per_block; i < (b + 1) * per_block; ++i) {
            const double q2 = batch.samples[i] * batch.samples[i];
            double p = 1.0;
            for (std::size_t k = 0; k <= m_max; ++k) {
                sums[k] += p;
                p *= q2;
            }
        }
        for (double& s : sums) s /= static_cast<double>(per_block);
        values.push_back(normalized_moments_from_quadrature_moments(t, sums));
        means.push_back(factorial_moments_from_quadrature_moments(t, {sums[0], sums[1]})[1]);
    }
    return aggregate(std::move(values), std::move(means), m_max, per_block, MomentSource::kMonteCarlo);
}

std::uint64_t block_seed(std::uint64_t seed, std::size_t block) { return mix64(seed ^ mix64(0xB10C0000ULL + block)); }

HomodyneMoments simulate_homodyne_moments(const QuadratureSource& source, std::size_t m_max, std::size_t blocks,
                                          std::uint64_t samples_per_block, std::uint64_t seed, unsigned threads) {
    source.validate();
    if (blocks < 2) throw InvalidInput("at least two blocks are needed for error bars");
    if (m_max < 1) throw InvalidInput("m_max must be >= 1");
    if (samples_per_block < 2) throw InvalidInput("blocks need at least two samples");
    const auto t = build_transfer_matrix(m_max);
    std::vector<std::vector<double>> sums(blocks);
    parallel_chunks(blocks, threads, [&](std::size_t b) {
        sums[b] = block_power_sums(source, samples_per_block, block_seed(seed, b), m_max);
    });
    std::vector<std::vector<double>> values;
    std::vector<double> means;
    for (auto& s : sums) {
        for (double& v : s) v /= static_cast<double>(samples_per_block);
        values.push_back(normalized_moments_from_quadrature_moments(t, s));
        means.push_back(factorial_moments_from_quadrature_moments(t, {s[0], s[1]})[1]);
    }
    return aggregate(std::move(values), std::move(means), m_max, samples_per_block, MomentSource::kMonteCarlo);
}

void write_quadratures_csv(std::ostream& out, const QuadratureBatch& batch) {
    out << "# state=" << batch.label << " seed=" << batch.seed << " count=" << batch.samples.size() << "\n";
    out << "q\n";
    for (double q : batch.samples) out << format_double(q) << '\n';
}

QuadratureBatch read_quadratures_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw InvalidInput("quadrature CSV: missing header");
    QuadratureBatch batch;
    std::uint64_t count = 0;
    bool have_count = false;
    std::istringstream header(line.substr(2));
    std::string field;
    while (header >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw InvalidInput("quadrature CSV: malformed header field '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        try {
            if (key == "state") {
                batch.label = value;
            } else if (key == "seed") {
                batch.seed = std::stoull(value);
            } else if (key == "count") {
                count = std::stoull(value);
                have_count = true;
            } else {
                throw InvalidInput("quadrature CSV: unknown header field '" + key + "'");
            }
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const InvalidInput*>(&e)) throw;
            throw InvalidInput("quadrature CSV: bad value for '" + key + "'");
        }
    }
    if (!std::getline(in, line) || (line != "q" && line != "q\r")) throw InvalidInput("quadrature CSV: missing 'q' column");
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        batch.samples.push_back(parse_double(line));
    }
    if (have_count && count != batch.samples.size()) throw InvalidInput("quadrature CSV: count does not match rows");
    if (batch.samples.empty()) throw InvalidInput("quadrature CSV: no samples");
    return batch;
}

}  // namespace photocorr
