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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using namespace photocorr;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "photocorr-experiments-test" / name;
    fs::remove_all(p);
    return p;
}

RunOutcome run_in(const json& config, const std::string& name, RunOptions options = {}) {
    options.out_dir = scratch(name);
    options.threads = options.threads == 0 ? 2 : options.threads;
    return run_experiment(config.dump(), options);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

json network_config() {
    return {{"experiment", "network-sim"},
            {"seed", 5},
            {"state", {{"kind", "thermal"}, {"mean", 0.3}}},
            {"network", {{"depth", 1}, {"detectors", {{"efficiency", 0.5}}}}},
            {"trials", 100000},
            {"orders", {2, 3}}};
}

json error_of(const RunOutcome& o) { return read_json(o.out_dir / "error.json"); }

}  // namespace

TEST(Config, EfficiencyAboveOneIsASchemaError) {
    auto c = network_config();
    c["network"]["detectors"]["efficiency"] = 1.2;
    auto o = run_in(c, "eta");
    EXPECT_EQ(o.exit_code, kExitInvalid);
    EXPECT_NE(o.error.find("network.detectors.efficiency"), std::string::npos) << o.error;
    const auto e = error_of(o);
    EXPECT_EQ(e["field"], "network.detectors.efficiency");
    EXPECT_EQ(e["exit_code"], 2);
    EXPECT_EQ(e["category"], "invalid_input");
    EXPECT_FALSE(fs::exists(o.out_dir / "summary.json"));

    c["network"]["detectors"] = json::array({{{"efficiency", 0.5}}, {{"efficiency", 0.5}}, {{"efficiency", 0.5}},
                                             {{"efficiency", -0.1}}});
    EXPECT_EQ(error_of(run_in(c, "eta-array"))["field"], "network.detectors[3].efficiency");
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
    auto c = network_config();
    c["trails"] = 10;
    auto o = run_in(c, "typo");
    EXPECT_EQ(o.exit_code, kExitInvalid);
    EXPECT_EQ(error_of(o)["field"], "trails");

    c = network_config();
    c["state"]["lambda"] = 1;
    EXPECT_EQ(error_of(run_in(c, "state-key"))["field"], "state.lambda");

    c = network_config();
    c["state"]["mean"] = -1;
    EXPECT_EQ(error_of(run_in(c, "neg-mean"))["field"], "state.mean");

    c = network_config();
    c["orders"] = {2, 9};
    EXPECT_EQ(error_of(run_in(c, "order"))["field"], "orders[1]");

    c = network_config();
    c["experiment"] = "tomography";
    EXPECT_EQ(error_of(run_in(c, "kind"))["field"], "experiment");

    RunOptions ro;
    ro.out_dir = scratch("malformed");
    auto bad = run_experiment("{\"experiment\": ", ro);
    EXPECT_EQ(bad.exit_code, kExitInvalid);
    EXPECT_TRUE(fs::exists(ro.out_dir->string() + "/error.json"));
}

TEST(Config, SeedIsMandatoryForStochasticRuns) {
    auto c = network_config();
    c.erase("seed");
    auto o = run_in(c, "noseed");
    EXPECT_EQ(o.exit_code, kExitInvalid);
    EXPECT_EQ(error_of(o)["field"], "seed");

    RunOptions ro;
    ro.seed = 99;
    auto ok = run_in(c, "override", ro);
    ASSERT_EQ(ok.exit_code, kExitOk) << ok.error;
    const auto s = read_json(ok.out_dir / "summary.json");
    EXPECT_EQ(s["seed"], 99);
    EXPECT_TRUE(s["seed_overridden"]);

    // Deterministic experiments need none.
    json p = {{"experiment", "phasespace"},
              {"state", {{"kind", "fock"}, {"k", 1}}},
              {"alpha", {{"from", 0}, {"to", 1}, {"points", 3}}}};
    auto det = run_in(p, "noseed-phasespace");
    EXPECT_EQ(det.exit_code, kExitOk) << det.error;
    EXPECT_TRUE(read_json(det.out_dir / "summary.json")["seed"].is_null());
}

TEST(Config, NumericalFailureExitsWithThree) {
    json c = {{"experiment", "pdc"},
              {"source",
               {{"kind", "double_gaussian"}, {"sum_width", 1.0}, {"difference_width", 0.1}, {"half_width", 4.5}, {"points", 41}}},
              {"means", {0.01}}};
    auto o = run_in(c, "coarse");
    EXPECT_EQ(o.exit_code, kExitNumerical);
    const auto e = error_of(o);
    EXPECT_EQ(e["category"], "numerical");
    EXPECT_EQ(e["exit_code"], 3);
    EXPECT_FALSE(e.contains("field"));
}

TEST(Config, UnwritableOutputIsAnIoError) {
    const fs::path blocker = scratch("blocker");
    fs::create_directories(blocker.parent_path());
    std::ofstream(blocker) << "x";
    RunOptions ro;
    ro.out_dir = blocker / "sub";
    auto o = run_experiment(network_config().dump(), ro);
    EXPECT_EQ(o.exit_code, kExitIo);
    EXPECT_FALSE(o.error.empty());
}

TEST(Run, NetworkOutputsAndSummary) {
    auto o = run_in(network_config(), "network");
    ASSERT_EQ(o.exit_code, kExitOk) << o.error;
    ASSERT_EQ(o.files.size(), 3u);
    EXPECT_EQ(o.files.back().filename(), "summary.json");
    const std::string clicks = slurp(o.out_dir / "clicks.csv");
    EXPECT_EQ(clicks.substr(0, clicks.find('\n')), "# detectors=4 trials=100000 seed=5");
    const std::string est = slurp(o.out_dir / "estimates.csv");
    EXPECT_EQ(est.substr(0, est.find('\n')), "# seed=5 trials=100000");
    EXPECT_NE(est.find("deconvolved,3,"), std::string::npos);

    const auto s = read_json(o.out_dir / "summary.json");
    EXPECT_EQ(s["status"], "ok");
    EXPECT_EQ(s["version"], PHOTOCORR_VERSION);
    EXPECT_EQ(s["input"], network_config());
    EXPECT_EQ(s["samples"]["trials"], 100000);
    EXPECT_EQ(s["files"], json({"clicks.csv", "estimates.csv"}));
}

TEST(Run, IdenticalConfigsGiveIdenticalFiles) {
    RunOptions one, three;
    one.threads = 1;
    three.threads = 3;
    auto a = run_in(network_config(), "rep-a", one);
    auto b = run_in(network_config(), "rep-b", one);
    auto c = run_in(network_config(), "rep-c", three);
    ASSERT_EQ(a.exit_code, kExitOk);
    for (const char* f : {"clicks.csv", "estimates.csv", "summary.json"}) {
        EXPECT_EQ(slurp(a.out_dir / f), slurp(b.out_dir / f)) << f;
    }
    for (const char* f : {"clicks.csv", "estimates.csv"}) EXPECT_EQ(slurp(a.out_dir / f), slurp(c.out_dir / f)) << f;
    auto other = network_config();
    other["seed"] = 6;
    EXPECT_NE(slurp(a.out_dir / "clicks.csv"), slurp(run_in(other, "rep-d").out_dir / "clicks.csv"));
}

TEST(Run, HomodyneTableLayout) {
    json c = {{"experiment", "homodyne"},
              {"seed", 1},
              {"states", {{{"kind", "coherent"}, {"mean", 1.0}}, {{"kind", "thermal"}, {"mean", 1.0}}}},
              {"blocks", 3},
              {"samples_per_block", 20000},
              {"m_max", 3}};
    auto o = run_in(c, "homodyne");
    ASSERT_EQ(o.exit_code, kExitOk) << o.error;
    std::istringstream table(slurp(o.out_dir / "table.csv"));
    std::string line;
    std::getline(table, line);
    EXPECT_EQ(line, "# seed=1 blocks=3 samples_per_block=20000");
    std::getline(table, line);
    EXPECT_EQ(line, "state,mean_photon_number,g2,g2_sd,g2_se,g3,g3_sd,g3_se");
    std::getline(table, line);
    EXPECT_EQ(line.rfind("coherent", 0), 0u);
    std::getline(table, line);
    EXPECT_EQ(line.rfind("thermal", 0), 0u);
    EXPECT_EQ(read_json(o.out_dir / "summary.json")["samples"]["total_per_state"], 60000);
}

TEST(Run, TesFromSynthesisAndFromFileAgree) {
    json c = {{"experiment", "tes-analysis"},
              {"seed", 8},
              {"synthesize", {{"state", {{"kind", "poisson"}, {"mean", 1.5}}}, {"count", 4000}, {"resolution", 0.3}}},
              {"peaks", 8},
              {"mc_trials", 500},
              {"write_traces", "binary"}};
    auto a = run_in(c, "tes-synth");
    ASSERT_EQ(a.exit_code, kExitOk) << a.error;
    EXPECT_TRUE(fs::exists(a.out_dir / "traces.tes"));

    // Relative trace paths resolve against the config file's directory.
    const fs::path dir = scratch("tes-file");
    fs::create_directories(dir);
    fs::copy_file(a.out_dir / "traces.tes", dir / "traces.tes");
    json f = {{"experiment", "tes-analysis"},
              {"seed", 8},
              {"traces", {{"file", "traces.tes"}}},
              {"peaks", 8},
              {"mc_trials", 500},
              {"output", {{"directory", (dir / "out").string()}}}};
    std::ofstream(dir / "config.json") << f.dump();
    auto b = run_experiment_file(dir / "config.json", {});
    ASSERT_EQ(b.exit_code, kExitOk) << b.error;
    EXPECT_EQ(b.out_dir, dir / "out");
    EXPECT_EQ(slurp(a.out_dir / "peaks.csv"), slurp(b.out_dir / "peaks.csv"));
    EXPECT_EQ(read_json(a.out_dir / "summary.json")["results"]["moments"],
              read_json(b.out_dir / "summary.json")["results"]["moments"]);

    f["traces"]["file"] = "missing.tes";
    std::ofstream(dir / "config.json") << f.dump();
    EXPECT_EQ(run_experiment_file(dir / "config.json", {}).exit_code, kExitInvalid);
}

TEST(Run, PdcPhasespaceAndNonclassicality) {
    json pdc = {{"experiment", "pdc"},
                {"source", {{"kind", "equal_modes"}, {"modes", 10}}},
                {"means", {0.01}},
                {"herald", {{"detector", {{"kind", "click"}, {"efficiency", 1.0}}}, {"cars", {10, 100}}}}};
    auto a = run_in(pdc, "pdc");
    ASSERT_EQ(a.exit_code, kExitOk) << a.error;
    EXPECT_EQ(read_json(a.out_dir / "summary.json")["results"]["effective_mode_number"], 10.0);
    EXPECT_TRUE(fs::exists(a.out_dir / "herald.csv"));

    pdc["herald"]["detector"] = {{"kind", "pnr"}, {"dark_count", 0.01}};
    EXPECT_EQ(error_of(run_in(pdc, "pdc-dark"))["field"], "herald.detector.dark_count");

    json ps = {{"experiment", "phasespace"},
               {"state", {{"kind", "thermal"}, {"mean", 0.5}}},
               {"alpha", {{"values", {{0.0, 0.0}, {0.5, 0.5}}}}},
               {"m_max", {21}}};
    auto b = run_in(ps, "phasespace");
    ASSERT_EQ(b.exit_code, kExitOk) << b.error;
    EXPECT_EQ(read_json(b.out_dir / "summary.json")["results"]["points"], 2);

    json nc = {{"experiment", "nonclassicality"},
               {"moments", {{"values", {1, 1, 0}}, {"mean_photon_number", 1}}},
               {"twin_beam", {{"g11", 1.5}, {"g20", 2}, {"g02", 2}}}};
    auto c = run_in(nc, "nonclassicality");
    ASSERT_EQ(c.exit_code, kExitOk) << c.error;
    const auto s = read_json(c.out_dir / "summary.json");
    EXPECT_TRUE(s["results"]["nonclassical"]);
    EXPECT_TRUE(s["results"]["verdicts"][0]["nonclassical"]);
    EXPECT_FALSE(s["results"]["verdicts"].back()["nonclassical"]);
}

TEST(Catalog, ListsEveryKind) {
    std::vector<std::string> names;
    for (const auto& e : experiment_catalog()) names.push_back(e.name);
    EXPECT_EQ(names, (std::vector<std::string>{"network-sim", "tes-analysis", "homodyne", "pdc", "phasespace",
                                               "nonclassicality"}));
}
