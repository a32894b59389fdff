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

#include "photocorr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "detection_json.hpp"
#include "json_util.hpp"
#include "photocorr/detection.hpp"
#include "photocorr/error.hpp"
#include "photocorr/fock.hpp"
#include "photocorr/format.hpp"
#include "photocorr/homodyne.hpp"
#include "photocorr/moments.hpp"
#include "photocorr/pdc.hpp"
#include "photocorr/phasespace.hpp"
#include "photocorr/random.hpp"
#include "photocorr/tes.hpp"

#ifndef PHOTOCORR_VERSION
#define PHOTOCORR_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace photocorr {

const std::vector<ExperimentInfo>& experiment_catalog() {
    static const std::vector<ExperimentInfo> catalog = {
        {"network-sim", "click-detector network Monte Carlo with HBT, m-fold and deconvolution estimators", true},
        {"tes-analysis", "TES traces (synthetic or from file) -> area histogram -> mixture fit -> g^(m) with MC errors",
         true},
        {"homodyne", "phase-randomized homodyne moments in blocks (reference-table layout)", true},
        {"pdc", "Schmidt spectrum, joint twin-beam moments against closed forms, heralded g^(2) curves", false},
        {"phasespace", "Wigner, Q and |chi|^2 from displaced moments on an alpha grid", false},
        {"nonclassicality", "moment-matrix, monotonicity, Schwarz and twin-beam Cauchy-Schwarz verdicts", false},
    };
    return catalog;
}

namespace {

using detail::Json;
using detail::as_number;
using detail::as_string;
using detail::as_uint;
using detail::check_keys;
using detail::child;
using detail::fail;
using detail::index;
using detail::number_or;
using detail::require;
using detail::string_or;
using detail::uint_or;

class IoError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

std::string num(double v) { return format_double(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string flag(bool b) { return b ? "1" : "0"; }

struct Context {
    Json config;
    std::string kind;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    fs::path out_dir;
    fs::path base_dir;
    std::vector<fs::path> files;
    Json samples = Json::object();
    Json results = Json::object();

    std::uint64_t require_seed() const {
        if (!seed) fail("seed", "required for the stochastic experiment '" + kind + "' (or pass --seed)");
        return *seed;
    }

    fs::path resolve_input(const std::string& p) const {
        fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }

    void write(const std::string& name, const std::string& content) {
        const fs::path path = out_dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << content;
        out.close();
        if (!out) throw IoError("cannot write " + path.string());
        files.push_back(path);
    }

    /// "# seed=S key=value ..." line for stochastic tables.
    std::string provenance(std::initializer_list<std::pair<const char*, std::uint64_t>> counts) const {
        std::string line = "# seed=" + std::to_string(*seed);
        for (const auto& [key, value] : counts) line += std::string(" ") + key + "=" + std::to_string(value);
        return line + "\n";
    }
};

std::string row(std::initializer_list<std::string> fields) { return join_csv(fields) + "\n"; }

std::vector<std::string> with_prefix(std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

// Shared schema pieces ------------------------------------------------------

std::vector<double> number_array(const Json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], index(path, i)));
    return out;
}

std::vector<std::size_t> uint_array(const Json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_uint(v[i], index(path, i)));
    return out;
}

double positive(const Json& j, const std::string& path, std::string_view key) {
    const double v = as_number(require(j, path, key), child(path, key));
    if (!(v > 0.0 && std::isfinite(v))) fail(child(path, key), "must be positive and finite");
    return v;
}

double nonnegative(double v, const std::string& path) {
    if (!(v >= 0.0 && std::isfinite(v))) fail(path, "must be nonnegative and finite");
    return v;
}

DisplacementAmplitude alpha_from_json(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2) fail(path, "expected [re, im]");
    const double re = as_number(v[0], index(path, 0));
    const double im = as_number(v[1], index(path, 1));
    if (!std::isfinite(re) || !std::isfinite(im)) fail(path, "must be finite");
    return {re, im};
}

struct StateConfig {
    StateSpec spec;
    std::string label;
    std::optional<std::size_t> n_max;
    double tail_tolerance = kDefaultTailTolerance;
};

StateConfig state_from_json(const Json& j, const std::string& path) {
    check_keys(j, path, {"kind", "k", "mean", "alpha", "n_max", "tail_tolerance"});
    StateConfig s;
    const std::string kind = as_string(require(j, path, "kind"), child(path, "kind"));
    auto forbid = [&](std::initializer_list<std::string_view> keys) {
        for (auto key : keys)
            if (j.contains(std::string(key))) fail(child(path, key), "not used by a " + kind + " state");
    };
    auto photon_number = [&] {
        const auto k = as_uint(require(j, path, "k"), child(path, "k"));
        if (k > 200) fail(child(path, "k"), "at most 200");
        return static_cast<std::size_t>(k);
    };
    auto mean = [&] { return nonnegative(as_number(require(j, path, "mean"), child(path, "mean")), child(path, "mean")); };
    if (kind == "fock") {
        forbid({"mean", "alpha"});
        const auto k = photon_number();
        s.spec = FockState{k};
        s.label = "fock(" + std::to_string(k) + ")";
    } else if (kind == "poisson" || kind == "coherent") {
        forbid({"k", "alpha"});
        const double m = mean();
        s.spec = PoissonState{m};
        s.label = "poisson(" + num(m) + ")";
    } else if (kind == "thermal") {
        forbid({"k", "alpha"});
        const double m = mean();
        s.spec = ThermalState{m};
        s.label = "thermal(" + num(m) + ")";
    } else if (kind == "displaced_fock") {
        forbid({"mean"});
        const auto k = photon_number();
        const auto a = alpha_from_json(require(j, path, "alpha"), child(path, "alpha"));
        s.spec = DisplacedFockState{k, a};
        s.label = "displaced_fock(" + std::to_string(k) + ";" + num(a.re()) + "," + num(a.im()) + ")";
    } else {
        fail(child(path, "kind"), "expected fock, poisson, coherent, thermal or displaced_fock");
    }
    if (j.contains("n_max")) s.n_max = as_uint(j["n_max"], child(path, "n_max"));
    s.tail_tolerance = number_or(j, path, "tail_tolerance", kDefaultTailTolerance);
    if (!(s.tail_tolerance > 0.0 && s.tail_tolerance < 1.0)) fail(child(path, "tail_tolerance"), "must lie in (0, 1)");
    return s;
}

/// The default truncation goes well past the declared tail tolerance: the
/// dropped tail enters g^(m) weighted by n^m, so a plain 1e-12 mass cut
/// leaves errors near 1e-10 in sixth-order moments of bright thermal light.
constexpr double kMomentTail = 1e-20;
constexpr std::size_t kMomentMargin = 40;

PhotonStatistics build_statistics(const StateConfig& s) {
    std::size_t n_max = 0;
    if (s.n_max) {
        n_max = *s.n_max;
    } else {
        // A displaced state's tail is a unitarity deficit, rounding-limited
        // near 1e-16, so it only gets the margin.
        const bool displaced = std::holds_alternative<DisplacedFockState>(s.spec);
        const double tail = displaced ? s.tail_tolerance : std::min(s.tail_tolerance, kMomentTail);
        n_max = required_n_max(s.spec, tail) + kMomentMargin;
        if (displaced) n_max = std::min<std::size_t>(n_max, 400);
    }
    return make_state(s.spec, n_max, s.tail_tolerance);
}

/// Moments of exact statistics up to `m_max`, or nothing for the vacuum.
std::optional<MomentReport> exact_moments(const PhotonStatistics& stats, std::size_t m_max) {
    if (stats.mean() <= 0.0 || m_max > stats.n_max()) return std::nullopt;
    return moments_from_statistics(stats, m_max);
}

void echo_moments(Json& out, const MomentReport& r) {
    out["mean_photon_number"] = r.mean_photon_number;
    out["g"] = r.values;
    out["sigma"] = r.uncertainties;
}

std::string moments_csv(const MomentReport& r, const std::optional<MomentReport>& expected) {
    std::string s = row({"m", "g", "sigma", "expected"});
    for (std::size_t m = 0; m <= r.m_max(); ++m) {
        s += row({num(std::uint64_t{m}), num(r.values[m]), num(r.uncertainties[m]),
                  expected && m <= expected->m_max() ? num(expected->values[m]) : ""});
    }
    return s;
}

// network-sim ----------------------------------------------------------------

bool is_balanced(const NetworkSpec& spec) {
    for (const auto& stage : spec.transmissions)
        for (double t : stage)
            if (t != 0.5) return false;
    for (const auto& d : spec.detectors)
        if (d.efficiency != spec.detectors[0].efficiency || d.dark_count != 0.0) return false;
    return spec.detectors[0].efficiency > 0.0;
}

void run_network(Context& ctx) {
    const Json& c = ctx.config;
    check_keys(c, "", {"experiment", "description", "seed", "output", "state", "network", "trials", "orders"});
    const auto state = state_from_json(require(c, "", "state"), "state");
    const NetworkSpec spec = detail::network_spec_from_json_value(require(c, "", "network"), "network");
    const std::uint64_t trials = as_uint(require(c, "", "trials"), "trials");
    if (trials == 0) fail("trials", "must be positive");
    std::vector<std::size_t> orders{2};
    if (c.contains("orders")) orders = uint_array(c["orders"], "orders");
    for (std::size_t i = 0; i < orders.size(); ++i) {
        if (orders[i] < 2 || orders[i] > spec.outputs()) {
            fail(index("orders", i), "must lie in 2.." + std::to_string(spec.outputs()));
        }
    }
    const std::uint64_t seed = ctx.require_seed();

    const PhotonStatistics stats = build_statistics(state);
    const ClickRecord record = simulate_network(stats, spec, trials, {seed, ctx.threads});
    const auto expected = exact_moments(stats, *std::max_element(orders.begin(), orders.end()));
    const bool balanced = is_balanced(spec);

    std::ostringstream clicks;
    write_click_record_csv(clicks, record);
    std::string text = clicks.str();
    text.insert(text.find('\n'), " seed=" + std::to_string(seed));
    ctx.write("clicks.csv", text);

    std::string table = ctx.provenance({{"trials", trials}});
    table += row({"estimator", "m", "value", "std_error", "events", "expected"});
    Json estimates = Json::array();
    auto emit = [&](const char* name, std::size_t m, const CountEstimate& e) {
        const std::string exp = expected ? num(expected->g(m)) : "";
        table += row({name, num(std::uint64_t{m}), num(e.value), num(e.std_error), num(e.events), exp});
        Json j{{"estimator", name}, {"m", m}, {"value", e.value}, {"std_error", e.std_error}, {"events", e.events}};
        if (expected) j["expected"] = expected->g(m);
        estimates.push_back(std::move(j));
    };
    for (std::size_t m : orders) {
        if (spec.outputs() == 2 && m == 2) emit("hbt", m, estimate_g2_hbt(record));
        emit("mfold_pooled", m, estimate_gm_pooled(record, m));
        if (balanced) {
            emit("deconvolved", m, estimate_gm_deconvolved(record, spec.detectors[0].efficiency, m));
            emit("raw_clicks", m, estimate_gm_raw_clicks(record, m));
        }
    }
    ctx.write("estimates.csv", table);
    ctx.samples["trials"] = trials;
    ctx.results["state"] = state.label;
    ctx.results["estimates"] = std::move(estimates);
}

// tes-analysis ---------------------------------------------------------------

PulseTemplate pulse_from_json(const Json& j, const std::string& path) {
    check_keys(j, path, {"length", "onset", "rise", "decay", "area"});
    PulseTemplate p;
    p.length = uint_or(j, path, "length", p.length);
    p.onset = uint_or(j, path, "onset", p.onset);
    p.rise = number_or(j, path, "rise", p.rise);
    p.decay = number_or(j, path, "decay", p.decay);
    p.area = number_or(j, path, "area", p.area);
    if (p.length == 0 || p.onset >= p.length) fail(child(path, "onset"), "must lie before the pulse end");
    if (!(p.rise > 0.0 && p.decay > p.rise)) fail(child(path, "decay"), "need 0 < rise < decay");
    if (!(p.area > 0.0)) fail(child(path, "area"), "must be positive");
    return p;
}

IntegrationWindow window_from_json(const Json& j, const std::string& path) {
    check_keys(j, path, {"start", "end"});
    IntegrationWindow w;
    w.start = uint_or(j, path, "start", w.start);
    w.end = uint_or(j, path, "end", w.end);
    if (w.end <= w.start) fail(child(path, "end"), "must exceed start");
    return w;
}

void run_tes(Context& ctx) {
    const Json& c = ctx.config;
    check_keys(c, "", {"experiment", "description", "seed", "output", "traces", "synthesize", "pulse", "window",
                       "peaks", "m_max", "mc_trials", "bin_width", "fit", "write_traces"});
    if (c.contains("traces") == c.contains("synthesize")) fail("traces", "give exactly one of traces or synthesize");
    const PulseTemplate pulse = c.contains("pulse") ? pulse_from_json(c["pulse"], "pulse") : PulseTemplate{};
    const IntegrationWindow window = c.contains("window") ? window_from_json(c["window"], "window") : IntegrationWindow{};
    const std::size_t peaks = as_uint(require(c, "", "peaks"), "peaks");
    if (peaks < 2 || peaks > 64) fail("peaks", "must lie in 2..64");
    const std::size_t m_max = uint_or(c, "", "m_max", 4);
    if (m_max < 2 || m_max >= peaks) fail("m_max", "must lie in 2..peaks-1");
    const std::size_t mc_trials = uint_or(c, "", "mc_trials", 10000);
    if (mc_trials < 100) fail("mc_trials", "at least 100");
    std::optional<double> bin_width;
    if (c.contains("bin_width")) bin_width = positive(c, "", "bin_width");
    FitOptions fit_options;
    if (c.contains("fit")) {
        const Json& f = c["fit"];
        check_keys(f, "fit", {"max_iterations", "tolerance", "min_free_events"});
        fit_options.max_iterations = uint_or(f, "fit", "max_iterations", fit_options.max_iterations);
        fit_options.tolerance = number_or(f, "fit", "tolerance", fit_options.tolerance);
        fit_options.min_free_events = number_or(f, "fit", "min_free_events", fit_options.min_free_events);
        if (fit_options.max_iterations == 0) fail("fit.max_iterations", "must be positive");
        if (!(fit_options.tolerance > 0.0)) fail("fit.tolerance", "must be positive");
    }
    const std::string write_traces = string_or(c, "", "write_traces", "none");
    if (write_traces != "none" && write_traces != "csv" && write_traces != "binary") {
        fail("write_traces", "expected none, csv or binary");
    }
    const std::uint64_t seed = ctx.require_seed();

    TesTraceSet traces;
    std::optional<MomentReport> expected;
    if (c.contains("synthesize")) {
        const Json& s = c["synthesize"];
        check_keys(s, "synthesize", {"state", "count", "resolution", "noise_sigma", "gain_jitter", "sample_rate"});
        const auto state = state_from_json(require(s, "synthesize", "state"), "synthesize.state");
        const std::size_t count = as_uint(require(s, "synthesize", "count"), "synthesize.count");
        if (count == 0) fail("synthesize.count", "must be positive");
        if (s.contains("resolution") == s.contains("noise_sigma")) {
            fail("synthesize.resolution", "give exactly one of resolution or noise_sigma");
        }
        if (window.end > pulse.length) fail("window.end", "beyond the trace length");
        SynthesisOptions o;
        o.noise_sigma = s.contains("resolution")
                            ? noise_sigma_for_resolution(pulse, window, positive(s, "synthesize", "resolution"))
                            : nonnegative(as_number(s["noise_sigma"], "synthesize.noise_sigma"), "synthesize.noise_sigma");
        o.gain_jitter = nonnegative(number_or(s, "synthesize", "gain_jitter", 0.0), "synthesize.gain_jitter");
        o.sample_rate = number_or(s, "synthesize", "sample_rate", o.sample_rate);
        if (!(o.sample_rate > 0.0)) fail("synthesize.sample_rate", "must be positive");
        o.seed = seed;
        o.threads = ctx.threads;
        const PhotonStatistics stats = build_statistics(state);
        traces = synthesize_traces(stats, pulse, count, o);
        traces.label = state.label;
        // The fit sees at most peaks - 1 photons; compare against the source
        // truncated there and renormalized.
        std::vector<double> w(peaks);
        for (std::size_t n = 0; n < peaks; ++n) w[n] = stats[n];
        expected = exact_moments(PhotonStatistics::from_weights(std::move(w)), m_max);
        ctx.results["state"] = state.label;
        ctx.results["noise_sigma"] = o.noise_sigma;
    } else {
        const Json& t = c["traces"];
        check_keys(t, "traces", {"file"});
        const fs::path file = ctx.resolve_input(as_string(require(t, "traces", "file"), "traces.file"));
        std::ifstream in(file, std::ios::binary);
        if (!in) fail("traces.file", "cannot open " + file.string());
        traces = file.extension() == ".csv" ? read_traces_csv(in) : read_traces_binary(in);
        if (window.end > traces.trace_length) fail("window.end", "beyond the trace length");
    }

    const auto areas = integrate_areas(traces, window, ctx.threads);
    const AreaHistogram hist = make_histogram(areas, bin_width);
    const MixtureFit fit = fit_mixture(hist, peaks, fit_options);
    const StatisticsWithErrors extracted = extract_statistics(fit);
    const MomentReport report = moments_with_mc_errors(extracted, m_max, mc_trials, seed, ctx.threads);

    if (write_traces == "csv") {
        std::ostringstream out;
        write_traces_csv(out, traces);
        ctx.write("traces.csv", out.str());
    } else if (write_traces == "binary") {
        std::ostringstream out;
        write_traces_binary(out, traces);
        ctx.write("traces.tes", out.str());
    }

    const std::string prov = ctx.provenance({{"traces", traces.size()}, {"mc_trials", mc_trials}});
    std::string h = prov + row({"low", "high", "count"});
    for (std::size_t b = 0; b < hist.bins(); ++b) h += row({num(hist.edges[b]), num(hist.edges[b + 1]), num(hist.counts[b])});
    ctx.write("histogram.csv", h);

    std::string p = prov + row({"n", "center", "sigma", "events", "events_sigma", "rho", "rho_sigma", "free_shape"});
    for (std::size_t n = 0; n < fit.peaks.size(); ++n) {
        const auto& pk = fit.peaks[n];
        const auto i = static_cast<Eigen::Index>(n);
        p += row({num(std::uint64_t{n}), num(pk.beta), num(1.0 / std::sqrt(2.0 * pk.alpha)), num(pk.events),
                  num(std::sqrt(std::max(0.0, fit.events_covariance(i, i)))), num(extracted.statistics[n]),
                  num(extracted.sigma[n]), flag(pk.free_shape)});
    }
    ctx.write("peaks.csv", p);
    ctx.write("moments.csv", prov + moments_csv(report, expected));

    ctx.samples["traces"] = traces.size();
    ctx.samples["mc_trials"] = mc_trials;
    ctx.results["fit_residual"] = fit.residual;
    ctx.results["fit_iterations"] = fit.iterations;
    if (fit.energy_resolution) ctx.results["energy_resolution"] = *fit.energy_resolution;
    echo_moments(ctx.results["moments"], report);
    if (expected) ctx.results["expected_g"] = expected->values;
}

// homodyne ---------------------------------------------------------------------

void run_homodyne(Context& ctx) {
    const Json& c = ctx.config;
    check_keys(c, "", {"experiment", "description", "seed", "output", "states", "blocks", "samples_per_block", "m_max"});
    const Json& states = require(c, "", "states");
    if (!states.is_array() || states.empty()) fail("states", "expected a nonempty array");
    std::vector<QuadratureSource> sources;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const std::string path = index("states", i);
        check_keys(states[i], path, {"kind", "mean"});
        QuadratureSource s;
        const std::string kind = as_string(require(states[i], path, "kind"), child(path, "kind"));
        if (kind == "coherent") {
            s.kind = QuadratureStateKind::kCoherent;
        } else if (kind == "thermal") {
            s.kind = QuadratureStateKind::kThermal;
        } else {
            fail(child(path, "kind"), "expected coherent or thermal");
        }
        s.mean = positive(states[i], path, "mean");
        sources.push_back(s);
    }
    const std::size_t blocks = uint_or(c, "", "blocks", 20);
    if (blocks < 2) fail("blocks", "at least 2");
    const std::uint64_t per_block = as_uint(require(c, "", "samples_per_block"), "samples_per_block");
    if (per_block < 2) fail("samples_per_block", "at least 2");
    const std::size_t m_max = uint_or(c, "", "m_max", 5);
    if (m_max < 2 || m_max > 12) fail("m_max", "must lie in 2..12");
    const std::uint64_t seed = ctx.require_seed();

    std::vector<std::string> cols, block_cols;
    for (std::size_t m = 2; m <= m_max; ++m) {
        const std::string g = "g" + std::to_string(m);
        cols.insert(cols.end(), {g, g + "_sd", g + "_se"});
        block_cols.push_back(g);
    }
    const std::string prov = ctx.provenance({{"blocks", blocks}, {"samples_per_block", per_block}});
    std::string table = prov + join_csv(with_prefix({"state", "mean_photon_number"}, cols)) + "\n";
    std::string per = prov + join_csv(with_prefix({"state", "block"}, block_cols)) + "\n";
    Json rows = Json::array();
    for (std::size_t i = 0; i < sources.size(); ++i) {
        // Independent stream per listed state.
        const std::uint64_t state_seed = mix64(seed ^ mix64(i + 1));
        const auto h = simulate_homodyne_moments(sources[i], m_max, blocks, per_block, state_seed, ctx.threads);
        std::vector<std::string> fields{sources[i].label(), num(sources[i].mean)};
        std::vector<double> expected;
        for (std::size_t m = 2; m <= m_max; ++m) {
            fields.insert(fields.end(), {num(h.report.values[m]), num(h.report.uncertainties[m]), num(h.standard_error[m])});
            expected.push_back(sources[i].kind == QuadratureStateKind::kThermal ? thermal_normalized_moment(m) : 1.0);
        }
        table += join_csv(fields) + "\n";
        for (std::size_t b = 0; b < blocks; ++b) {
            std::vector<std::string> f{sources[i].label(), std::to_string(b)};
            for (std::size_t m = 2; m <= m_max; ++m) f.push_back(num(h.block_values[b][m]));
            per += join_csv(f) + "\n";
        }
        Json r{{"state", sources[i].label()}, {"seed", state_seed}, {"expected_g_from_2", expected}};
        echo_moments(r, h.report);
        r["standard_error"] = h.standard_error;
        rows.push_back(std::move(r));
    }
    ctx.write("table.csv", table);
    ctx.write("blocks.csv", per);
    ctx.samples["blocks"] = blocks;
    ctx.samples["samples_per_block"] = per_block;
    ctx.samples["total_per_state"] = blocks * per_block;
    ctx.results["states"] = std::move(rows);
}

// pdc ----------------------------------------------------------------------------

struct PdcSource {
    PairSource pairs = PairSource::single_mode();
    std::optional<SchmidtSpectrum> spectrum;
};

PdcSource pdc_source_from_json(const Context& ctx, const Json& j, const std::string& path) {
    check_keys(j, path, {"kind", "weights", "modes", "sum_width", "difference_width", "half_width", "points", "file",
                         "schmidt"});
    const std::string kind = as_string(require(j, path, "kind"), child(path, "kind"));
    SchmidtOptions options;
    if (j.contains("schmidt")) {
        const std::string sp = child(path, "schmidt");
        check_keys(j["schmidt"], sp, {"rank_cutoff", "max_residual", "max_resolution_drift", "max_edge_fraction"});
        options.rank_cutoff = number_or(j["schmidt"], sp, "rank_cutoff", options.rank_cutoff);
        options.max_residual = number_or(j["schmidt"], sp, "max_residual", options.max_residual);
        options.max_resolution_drift = number_or(j["schmidt"], sp, "max_resolution_drift", options.max_resolution_drift);
        options.max_edge_fraction = number_or(j["schmidt"], sp, "max_edge_fraction", options.max_edge_fraction);
    }
    auto from = [](SchmidtSpectrum s) { return PdcSource{PairSource::from_spectrum(s), s}; };
    if (kind == "single_mode") return from(SchmidtSpectrum::from_weights({1.0}));
    if (kind == "multimode_limit") return {PairSource::multimode_limit(), std::nullopt};
    if (kind == "weights") {
        auto w = number_array(require(j, path, "weights"), child(path, "weights"));
        for (std::size_t i = 0; i < w.size(); ++i) nonnegative(w[i], index(child(path, "weights"), i));
        return from(SchmidtSpectrum::from_weights(std::move(w)));
    }
    if (kind == "equal_modes") {
        const auto k = as_uint(require(j, path, "modes"), child(path, "modes"));
        if (k == 0 || k > 100000) fail(child(path, "modes"), "must lie in 1..100000");
        return from(SchmidtSpectrum::from_weights(std::vector<double>(k, 1.0)));
    }
    if (kind == "double_gaussian") {
        // exp(-(ws + wi)^2 / 2a^2 - (ws - wi)^2 / 2b^2) on a square grid.
        const double a = positive(j, path, "sum_width");
        const double b = positive(j, path, "difference_width");
        const double half = positive(j, path, "half_width");
        const auto points = as_uint(require(j, path, "points"), child(path, "points"));
        if (points < 3 || points > 2001) fail(child(path, "points"), "must lie in 3..2001");
        const auto axis = linear_grid(-half, half, points);
        const auto jsa = sample_jsa(axis, axis, [&](double x, double y) {
            return std::complex<double>(std::exp(-(x + y) * (x + y) / (2 * a * a) - (x - y) * (x - y) / (2 * b * b)), 0.0);
        });
        return from(schmidt_decompose(jsa, options));
    }
    if (kind == "jsa_file") {
        const fs::path file = ctx.resolve_input(as_string(require(j, path, "file"), child(path, "file")));
        std::ifstream in(file);
        if (!in) fail(child(path, "file"), "cannot open " + file.string());
        return from(schmidt_decompose(read_jsa_csv(in), options));
    }
    fail(child(path, "kind"), "expected single_mode, multimode_limit, weights, equal_modes, double_gaussian or jsa_file");
}

HeraldSetup herald_setup_from_json(const Json& j, const std::string& path) {
    HeraldSetup h;
    if (j.contains("detector")) h.detector = detail::detector_from_json_value(j["detector"], child(path, "detector"));
    h.outcome = uint_or(j, path, "outcome", 1);
    if (h.outcome == 0) fail(child(path, "outcome"), "must be positive");
    if (h.detector.kind == DetectorKind::kPnr && h.detector.dark_count > 0.0) {
        fail(child(path, "detector.dark_count"), "dark counts on a PNR herald are not modelled");
    }
    return h;
}

void run_pdc(Context& ctx) {
    const Json& c = ctx.config;
    check_keys(c, "", {"experiment", "description", "seed", "output", "source", "means", "orders", "herald"});
    const PdcSource source = pdc_source_from_json(ctx, require(c, "", "source"), "source");
    std::vector<double> means;
    if (c.contains("means")) {
        means = number_array(c["means"], "means");
        for (std::size_t i = 0; i < means.size(); ++i) {
            if (!(means[i] > 0.0 && means[i] <= 20.0)) fail(index("means", i), "must lie in (0, 20]");
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> orders{{1, 1}, {2, 0}, {0, 2}, {2, 1}, {1, 2}};
    if (c.contains("orders")) {
        orders.clear();
        const Json& o = c["orders"];
        if (!o.is_array() || o.empty()) fail("orders", "expected a nonempty array of [w, v] pairs");
        for (std::size_t i = 0; i < o.size(); ++i) {
            const auto wv = uint_array(o[i], index("orders", i));
            if (wv.size() != 2 || wv[0] + wv[1] == 0 || wv[0] + wv[1] > 12) {
                fail(index("orders", i), "expected [w, v] with 1 <= w + v <= 12");
            }
            orders.emplace_back(wv[0], wv[1]);
        }
    }
    std::optional<std::pair<HeraldSetup, std::vector<double>>> herald;
    if (c.contains("herald")) {
        const Json& h = c["herald"];
        check_keys(h, "herald", {"detector", "outcome", "cars"});
        auto cars = number_array(require(h, "herald", "cars"), "herald.cars");
        for (std::size_t i = 0; i < cars.size(); ++i) {
            if (!(cars[i] > 1.0)) fail(index("herald.cars", i), "must exceed 1");
        }
        herald.emplace(herald_setup_from_json(h, "herald"), std::move(cars));
    }
    if (means.empty() && !herald) fail("means", "nothing to compute: give means and/or herald");

    if (source.spectrum) {
        std::string s = row({"q", "weight"});
        for (std::size_t q = 0; q < source.spectrum->weights.size(); ++q) {
            s += row({num(std::uint64_t{q}), num(source.spectrum->weights[q])});
        }
        ctx.write("schmidt.csv", s);
        ctx.results["effective_mode_number"] = source.spectrum->effective_mode_number();
        ctx.results["schmidt_residual"] = source.spectrum->residual;
        ctx.results["resolution_drift"] = source.spectrum->resolution_drift;
    }
    ctx.results["source"] = source.pairs.label();

    if (!means.empty()) {
        const double inv_k = source.pairs.inverse_mode_number();
        const double sum6 = source.spectrum ? source.spectrum->sum_power(6) : 0.0;
        std::string t = row({"mean_photon_number", "w", "v", "exact", "closed_form", "relative_gap", "n_max", "tail_bound"});
        Json rows = Json::array();
        for (double mean : means) {
            const JointPhotonStatistics joint = source.pairs.joint(mean);
            for (auto [w, v] : orders) {
                const double exact = joint_normalized_moment(joint, w, v);
                const auto closed = joint_moment_closed_form(w, v, mean, inv_k, sum6);
                const std::string gap = closed ? num(std::abs(*closed - exact) / std::abs(exact)) : "";
                t += row({num(mean), num(std::uint64_t{w}), num(std::uint64_t{v}), num(exact),
                          closed ? num(*closed) : "", gap, num(std::uint64_t{joint.n_max_signal()}),
                          num(joint.tail_bound())});
                Json r{{"mean_photon_number", mean}, {"w", w}, {"v", v}, {"exact", exact}};
                if (closed) r["closed_form"] = *closed;
                rows.push_back(std::move(r));
            }
        }
        ctx.write("joint_moments.csv", t);
        ctx.results["joint_moments"] = std::move(rows);
    }
    if (herald) {
        const auto points = g2h_curve(source.pairs, herald->second, herald->first, ctx.threads);
        std::ostringstream out;
        write_herald_curve_csv(out, points);
        ctx.write("herald.csv", out.str());
        Json rows = Json::array();
        for (const auto& p : points) {
            rows.push_back({{"car", p.car},
                            {"mean_photon_number", p.mean_photon_number},
                            {"g2h", p.g2h},
                            {"success_probability", p.success_probability}});
        }
        ctx.results["herald"] = std::move(rows);
    }
}

// phasespace -------------------------------------------------------------------

void run_phasespace(Context& ctx) {
    const Json& c = ctx.config;
    check_keys(c, "", {"experiment", "description", "seed", "output", "state", "alpha", "m_max", "chi_order"});
    const StateConfig state = state_from_json(require(c, "", "state"), "state");
    const Json& a = require(c, "", "alpha");
    std::vector<DisplacementAmplitude> alphas;
    if (a.contains("values")) {
        check_keys(a, "alpha", {"values"});
        const Json& v = a["values"];
        if (!v.is_array() || v.empty()) fail("alpha.values", "expected a nonempty array of [re, im]");
        for (std::size_t i = 0; i < v.size(); ++i) alphas.push_back(alpha_from_json(v[i], index("alpha.values", i)));
    } else {
        check_keys(a, "alpha", {"from", "to", "points", "phase"});
        const double lo = nonnegative(as_number(require(a, "alpha", "from"), "alpha.from"), "alpha.from");
        const double hi = nonnegative(as_number(require(a, "alpha", "to"), "alpha.to"), "alpha.to");
        const auto points = as_uint(require(a, "alpha", "points"), "alpha.points");
        if (hi < lo) fail("alpha.to", "must not be below alpha.from");
        if (points < 1 || points > 100000) fail("alpha.points", "must lie in 1..100000");
        if (points == 1 && hi != lo) fail("alpha.points", "a single point needs from == to");
        alphas = radial_grid(lo, hi, points, number_or(a, "alpha", "phase", 0.0));
    }
    std::vector<std::size_t> m_list{6, 11, 16, 21};
    if (c.contains("m_max")) m_list = uint_array(c["m_max"], "m_max");
    for (std::size_t i = 0; i < m_list.size(); ++i) {
        if (m_list[i] < 1 || m_list[i] > 60) fail(index("m_max", i), "must lie in 1..60");
    }
    std::size_t chi_order = 1;
    if (const auto* f = std::get_if<FockState>(&state.spec)) chi_order = f->k;
    chi_order = uint_or(c, "", "chi_order", chi_order);

    // Displaced Fock states keep their coherences as amplitude vectors.
    // Poisson and thermal entries are the phase-averaged, diagonal states.
    PhaseSpaceState ps = FockAmplitudeVector::fock(0);
    if (const auto* f = std::get_if<FockState>(&state.spec)) {
        ps = FockAmplitudeVector::fock(f->k);
    } else if (const auto* d = std::get_if<DisplacedFockState>(&state.spec)) {
        const std::size_t n_max = state.n_max.value_or(std::min<std::size_t>(required_n_max(state.spec, state.tail_tolerance) + 16, 400));
        ps = displaced_fock_amplitudes(d->k, d->alpha, n_max);
    } else {
        ps = build_statistics(state);
    }
    const ReconstructionGrid grid = reconstruct_grid(ps, alphas, m_list, chi_order, ctx.threads);
    std::ostringstream out;
    write_reconstruction_csv(out, grid);
    ctx.write("reconstruction.csv", out.str());

    std::size_t flagged = 0;
    double worst = 0.0;
    for (const auto& p : grid.points) {
        for (auto [sv, oracle] : {std::pair{&p.wigner, p.wigner_oracle}, {&p.q, p.q_oracle}, {&p.chi2, p.chi2_oracle}}) {
            if (!sv->converged) continue;
            ++flagged;
            worst = std::max(worst, std::abs(sv->value - oracle));
        }
    }
    ctx.results["state"] = state.label;
    ctx.results["points"] = grid.points.size();
    ctx.results["chi_order"] = chi_order;
    ctx.results["converged_values"] = flagged;
    ctx.results["max_converged_oracle_gap"] = worst;
}

// nonclassicality ----------------------------------------------------------------

std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

void run_nonclassicality(Context& ctx) {
    const Json& c = ctx.config;
    check_keys(c, "", {"experiment", "description", "seed", "output", "state", "moments", "m_max", "matrix_sizes",
                       "schwarz", "monotonicity", "twin_beam"});
    if (c.contains("state") && c.contains("moments")) fail("moments", "give either state or moments, not both");
    std::optional<MomentReport> report;
    std::optional<MomentReport> exact;
    std::string label;
    if (c.contains("state")) {
        const StateConfig state = state_from_json(c["state"], "state");
        const std::size_t m_max = uint_or(c, "", "m_max", 6);
        if (m_max < 2 || m_max > 40) fail("m_max", "must lie in 2..40");
        const PhotonStatistics stats = build_statistics(state);
        if (!(stats.mean() > 0.0)) fail("state", "vacuum has no normalized moments");
        if (m_max > stats.n_max()) fail("m_max", "exceeds the state's truncation");
        report = moments_from_statistics(stats, m_max);
        label = state.label;
    } else if (c.contains("moments")) {
        if (c.contains("m_max")) fail("m_max", "only used with state");
        const Json& m = c["moments"];
        check_keys(m, "moments", {"values", "uncertainties", "mean_photon_number", "mean_uncertainty"});
        auto values = number_array(require(m, "moments", "values"), "moments.values");
        std::vector<double> unc;
        if (m.contains("uncertainties")) unc = number_array(m["uncertainties"], "moments.uncertainties");
        if (!unc.empty() && unc.size() != values.size()) fail("moments.uncertainties", "must match values in length");
        report = MomentReport::make(std::move(values), std::move(unc), positive(m, "moments", "mean_photon_number"),
                                    number_or(m, "moments", "mean_uncertainty", 0.0), MomentSource::kMeasured);
        label = "measured";
    } else if (!c.contains("twin_beam")) {
        fail("state", "give state, moments and/or twin_beam");
    }

    std::vector<NonclassicalityVerdict> verdicts;
    if (report) {
        std::vector<std::size_t> sizes;
        if (c.contains("matrix_sizes")) {
            sizes = uint_array(c["matrix_sizes"], "matrix_sizes");
        } else {
            for (std::size_t s = 2; 2 * s - 2 <= report->m_max() && s <= 3; ++s) sizes.push_back(s);
        }
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            if (sizes[i] < 2 || 2 * sizes[i] - 2 > report->m_max()) {
                fail(index("matrix_sizes", i), "needs 2 <= size and 2 size - 2 <= m_max");
            }
            verdicts.push_back(moment_matrix_test(*report, sizes[i]));
        }
        if (c.contains("monotonicity") ? detail::as_bool(c["monotonicity"], "monotonicity") : true) {
            verdicts.push_back(monotonicity_test(*report));
        }
        if (c.contains("schwarz")) {
            const Json& s = c["schwarz"];
            if (!s.is_array()) fail("schwarz", "expected an array of [h, m] pairs");
            for (std::size_t i = 0; i < s.size(); ++i) {
                const auto hm = uint_array(s[i], index("schwarz", i));
                if (hm.size() != 2 || hm[1] < 1 || hm[0] < hm[1] || hm[0] + hm[1] > report->m_max()) {
                    fail(index("schwarz", i), "expected [h, m] with 1 <= m <= h and h + m <= m_max");
                }
                verdicts.push_back(schwarz_test(*report, hm[0], hm[1]));
            }
        }
        ctx.write("moments.csv", moments_csv(*report, std::nullopt));
    }
    if (c.contains("twin_beam")) {
        const Json& t = c["twin_beam"];
        if (t.contains("source")) {
            check_keys(t, "twin_beam", {"source", "mean"});
            const PdcSource src = pdc_source_from_json(ctx, t["source"], "twin_beam.source");
            const double mean = positive(t, "twin_beam", "mean");
            if (mean > 20.0) fail("twin_beam.mean", "at most 20");
            const auto joint = src.pairs.joint(mean);
            verdicts.push_back(twin_beam_nonclassicality(joint_normalized_moment(joint, 1, 1),
                                                         joint_normalized_moment(joint, 2, 0),
                                                         joint_normalized_moment(joint, 0, 2)));
        } else {
            check_keys(t, "twin_beam", {"g11", "g20", "g02", "sigma11", "sigma20", "sigma02"});
            auto g = [&](std::string_view k) { return nonnegative(as_number(require(t, "twin_beam", k), child("twin_beam", k)), child("twin_beam", k)); };
            auto s = [&](std::string_view k) { return nonnegative(number_or(t, "twin_beam", k, 0.0), child("twin_beam", k)); };
            verdicts.push_back(twin_beam_nonclassicality(g("g11"), g("g20"), g("g02"), s("sigma11"), s("sigma20"), s("sigma02")));
        }
    }

    std::string v = row({"criterion", "statistic", "slack", "uncertainty", "nonclassical", "significance", "order", "determinant"});
    Json rows = Json::array();
    bool any = false;
    for (const auto& d : verdicts) {
        v += row({d.criterion, num(d.statistic), num(d.slack), num(d.uncertainty), flag(d.nonclassical),
                  opt(d.significance), d.order ? num(std::uint64_t{*d.order}) : "", opt(d.determinant)});
        Json r{{"criterion", d.criterion}, {"statistic", d.statistic}, {"slack", d.slack}, {"nonclassical", d.nonclassical}};
        rows.push_back(std::move(r));
        any = any || d.nonclassical;
    }
    ctx.write("verdicts.csv", v);
    if (!label.empty()) ctx.results["state"] = label;
    ctx.results["verdicts"] = std::move(rows);
    ctx.results["nonclassical"] = any;
}

using Runner = void (*)(Context&);

Runner runner_for(const std::string& kind) {
    if (kind == "network-sim") return run_network;
    if (kind == "tes-analysis") return run_tes;
    if (kind == "homodyne") return run_homodyne;
    if (kind == "pdc") return run_pdc;
    if (kind == "phasespace") return run_phasespace;
    if (kind == "nonclassicality") return run_nonclassicality;
    return nullptr;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

RunOutcome run_experiment(const std::string& config_text, const RunOptions& options) {
    RunOutcome outcome;
    Context ctx;
    ctx.base_dir = options.base_dir;
    ctx.threads = options.threads == 0 ? default_thread_count() : options.threads;
    if (options.out_dir) ctx.out_dir = *options.out_dir;

    auto report_error = [&](int code, const char* category, const std::string& message, const std::string& field) {
        outcome.exit_code = code;
        outcome.error = message;
        if (ctx.out_dir.empty()) return;
        Json e{{"status", "error"},
               {"exit_code", code},
               {"category", category},
               {"message", message},
               {"version", PHOTOCORR_VERSION}};
        if (!field.empty()) e["field"] = field;
        if (!ctx.kind.empty()) e["experiment"] = ctx.kind;
        try {
            std::error_code ec;
            fs::create_directories(ctx.out_dir, ec);
            ctx.write("error.json", dump(e));
        } catch (const IoError&) {
            // Nothing more to do: the caller still gets the message.
        }
    };

    try {
        ctx.config = detail::parse_json(config_text, "config");
        detail::require_object(ctx.config, "");
        ctx.kind = as_string(require(ctx.config, "", "experiment"), "experiment");
        const Runner runner = runner_for(ctx.kind);
        if (!runner) {
            std::string names;
            for (const auto& e : experiment_catalog()) names += (names.empty() ? "" : ", ") + e.name;
            fail("experiment", "unknown experiment '" + ctx.kind + "' (expected one of " + names + ")");
        }
        if (ctx.out_dir.empty()) {
            ctx.out_dir = fs::path("results") / ctx.kind;
            if (ctx.config.contains("output")) {
                const Json& o = ctx.config["output"];
                check_keys(o, "output", {"directory"});
                ctx.out_dir = as_string(require(o, "output", "directory"), "output.directory");
            }
        } else if (ctx.config.contains("output")) {
            check_keys(ctx.config["output"], "output", {"directory"});
        }
        if (ctx.config.contains("description")) as_string(ctx.config["description"], "description");
        if (ctx.config.contains("seed")) ctx.seed = as_uint(ctx.config["seed"], "seed");
        if (options.seed) ctx.seed = options.seed;

        std::error_code ec;
        fs::create_directories(ctx.out_dir, ec);
        if (ec) throw IoError("cannot create " + ctx.out_dir.string() + ": " + ec.message());

        runner(ctx);

        Json summary{{"status", "ok"},
                     {"experiment", ctx.kind},
                     {"version", PHOTOCORR_VERSION},
                     {"seed", ctx.seed ? Json(*ctx.seed) : Json(nullptr)},
                     {"seed_overridden", options.seed.has_value()},
                     {"threads", ctx.threads},
                     {"input", ctx.config},
                     {"samples", ctx.samples},
                     {"results", ctx.results}};
        Json files = Json::array();
        for (const auto& f : ctx.files) files.push_back(f.filename().string());
        summary["files"] = files;
        ctx.write("summary.json", dump(summary));
    } catch (const detail::FieldError& e) {
        report_error(kExitInvalid, "invalid_input", e.what(), e.field());
    } catch (const InvalidInput& e) {
        report_error(kExitInvalid, "invalid_input", e.what(), "");
    } catch (const NumericalError& e) {
        report_error(kExitNumerical, "numerical", e.what(), "");
    } catch (const IoError& e) {
        report_error(kExitIo, "io", e.what(), "");
    }
    outcome.out_dir = ctx.out_dir;
    outcome.files = ctx.files;
    return outcome;
}

RunOutcome run_experiment_file(const fs::path& config, RunOptions options) {
    std::ifstream in(config, std::ios::binary);
    if (!in) {
        RunOutcome o;
        o.exit_code = kExitIo;
        o.error = "cannot read config " + config.string();
        return o;
    }
    std::ostringstream text;
    text << in.rdbuf();
    options.base_dir = config.has_parent_path() ? config.parent_path() : fs::path(".");
    return run_experiment(text.str(), options);
}

}  // namespace photocorr
