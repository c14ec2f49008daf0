/*
 * Copyright 2026 The lqer-toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Drives the installed CLI binary end to end through every verb, checking
// printed metrics against the library and files against their in-memory
// counterparts.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lqer/calibration.hpp"
#include "lqer/io.hpp"
#include "lqer/layer.hpp"
#include "lqer/quant.hpp"
#include "lqer/reconstruction.hpp"

using namespace lqer;

namespace {

struct CliResult {
    int exit_code;
    std::string out;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(LQER_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
    const int status = ::pclose(pipe);
    return CliResult{WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class TempDir {
public:
    TempDir() {
        path_ = std::filesystem::temp_directory_path() /
                ("lqer_cli_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

TempDir& tmp() {
    static TempDir dir;
    return dir;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

// value of "key=<value>" on the given line of the output
std::string metric(const std::string& out, const std::string& key, int line_index = 0) {
    std::istringstream stream(out);
    std::string line;
    for (int i = 0; i <= line_index; ++i) REQUIRE(std::getline(stream, line));
    const std::size_t at = line.find(key + "=");
    REQUIRE(at != std::string::npos);
    const std::size_t start = at + key.size() + 1;
    const std::size_t end = line.find(' ', start);
    return line.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

TEST_CASE("synth writes loadable weight and activation files") {
    const std::string w = tmp().file("w0.lqmx");
    CliResult r = run_cli("synth --kind weights --rows 64 --cols 64 --seed 3 --out " + w);
    CHECK(r.exit_code == 0);
    CHECK(load_matrix(w) == synth_weights(64, 64, 3));

    const std::string x = tmp().file("x.lqmx");
    r = run_cli("synth --kind activations --cols 64 --tokens 96 --outlier-channels 8 "
                "--outlier-gain 100 --spread 0.5 --seed 11 --out " + x);
    CHECK(r.exit_code == 0);
    SynthActivationConfig cfg;
    cfg.channels = 64;
    cfg.tokens = 96;
    cfg.outlier_channels = 8;
    cfg.outlier_gain = 100.0;
    cfg.base_scale_spread = 0.5;
    cfg.seed = 11;
    CHECK(load_matrix(x) == synth_activations(cfg));
}

TEST_CASE("calibrate reproduces hand-computed statistics") {
    save_matrix(tmp().file("s0.lqmx"), DenseMatrix{{1, -3}, {2, 1}});
    save_matrix(tmp().file("s1.lqmx"), DenseMatrix{{3, 0.5}});
    const std::string profile_path = tmp().file("profile.json");
    const CliResult r = run_cli("calibrate " + tmp().file("s0.lqmx") + " " +
                                tmp().file("s1.lqmx") + " --out " + profile_path);
    CHECK(r.exit_code == 0);
    CHECK(metric(r.out, "channels") == "2");
    CHECK(metric(r.out, "a_bar_min") == "2");   // max(mean) per channel: [3, 2]
    CHECK(metric(r.out, "a_bar_max") == "3");

    const ProfileFile file = load_profile(profile_path);
    CHECK(file.profile.a_bar == std::vector<double>{3.0, 2.0});
    CHECK(file.profile.sample_count == 2);
    CHECK(file.dead_channel_policy == "error");
}

TEST_CASE("calibrate fails on a dead channel unless flooring is requested") {
    save_matrix(tmp().file("dead.lqmx"), DenseMatrix{{1, 0}, {2, 0}});
    const CliResult fail = run_cli("calibrate " + tmp().file("dead.lqmx") + " --out " +
                                   tmp().file("dead_profile.json"));
    CHECK(fail.exit_code == 5);
    CHECK(fail.out.find("channel 1") != std::string::npos);

    const CliResult ok = run_cli("calibrate " + tmp().file("dead.lqmx") +
                                 " --floor-dead-channels --out " +
                                 tmp().file("floored_profile.json"));
    CHECK(ok.exit_code == 0);
    CHECK(load_profile(tmp().file("floored_profile.json")).dead_channel_policy == "floored");
}

TEST_CASE("quantize prints metrics that match the library exactly") {
    const std::string w = tmp().file("w0.lqmx");  // written by the synth test
    REQUIRE(std::filesystem::exists(w));
    const std::string bundle_path = tmp().file("w4k8.lqbd");
    const CliResult r = run_cli("quantize " + w + " --method lqer --bits 4 --k 8 --seed 3 "
                                "--out " + bundle_path);
    CHECK(r.exit_code == 0);

    const DenseMatrix weights = load_matrix(w);
    const LqerLayer layer =
        build_layer(weights, QuantConfig::mxint(4, 4, 16, BlockOrientation::along_col),
                    Method::lqer, 8, {}, default_act_quant(), default_factor_quant());
    const ErrorReport expected =
        approximation_error(quant_error(weights, layer.w_q), *layer.correction);
    CHECK(metric(r.out, "e_a") == format_double(expected.e_a));
    CHECK(metric(r.out, "rel_frobenius") == format_double(expected.rel_frobenius));

    const Bundle bundle = load_bundle(bundle_path);
    REQUIRE(bundle.layers.size() == 1);
    CHECK(bundle.seed == 3);
    CHECK(bundle.layers[0].w_q == layer.w_q);
}

TEST_CASE("quantize reports zero error for representable weights under every method") {
    const QuantConfig w4 = QuantConfig::mxint(4, 4, 16, BlockOrientation::along_col);
    const DenseMatrix representable = snap_matrix(synth_weights(32, 32, 5), w4);
    save_matrix(tmp().file("repr.lqmx"), representable);

    // constant-magnitude activations give an all-ones scale profile
    DenseMatrix flat(4, 32);
    for (double& v : flat.values()) v = 1.0;
    save_matrix(tmp().file("flat.lqmx"), flat);
    REQUIRE(run_cli("calibrate " + tmp().file("flat.lqmx") + " --out " +
                    tmp().file("ones.json")).exit_code == 0);

    for (const std::string method : {"plain", "lqer", "l2qer"}) {
        const CliResult r = run_cli("quantize " + tmp().file("repr.lqmx") + " --method " +
                                    method + " --k 4 --profile " + tmp().file("ones.json") +
                                    " --out " + tmp().file("repr_" + method + ".lqbd"));
        CHECK(r.exit_code == 0);
        CHECK(metric(r.out, "e_a") == "0");
    }
}

TEST_CASE("quantize: lqer and l2qer agree under an identity profile") {
    const std::string w = tmp().file("w0.lqmx");
    // profile with 64 constant channels comes out as the all-ones scale
    DenseMatrix flat(4, 64);
    for (double& v : flat.values()) v = 2.0;
    save_matrix(tmp().file("flat64.lqmx"), flat);
    REQUIRE(run_cli("calibrate " + tmp().file("flat64.lqmx") + " --out " +
                    tmp().file("ones64.json")).exit_code == 0);

    const CliResult a = run_cli("quantize " + w + " --method lqer --k 8 --out " +
                                tmp().file("eq_a.lqbd"));
    const CliResult b = run_cli("quantize " + w + " --method l2qer --k 8 --profile " +
                                tmp().file("ones64.json") + " --out " + tmp().file("eq_b.lqbd"));
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    const double rel_a = std::stod(metric(a.out, "rel_frobenius"));
    const double rel_b = std::stod(metric(b.out, "rel_frobenius"));
    CHECK(std::abs(rel_a - rel_b) <= 1e-10 * rel_a);
}

TEST_CASE("quantize output is byte-identical across runs") {
    const std::string w = tmp().file("w0.lqmx");
    const std::string out1 = tmp().file("det1.lqbd");
    const std::string out2 = tmp().file("det2.lqbd");
    const CliResult r1 = run_cli("quantize " + w + " --method lqer --k 4 --out " + out1);
    const CliResult r2 = run_cli("quantize " + w + " --method lqer --k 4 --out " + out2);
    CHECK(r1.exit_code == 0);
    CHECK(r2.exit_code == 0);
    CHECK(metric(r1.out, "e_a") == metric(r2.out, "e_a"));
    CHECK(read_file(out1) == read_file(out2));
}

TEST_CASE("spectrum: identity profile gives two identical columns") {
    const std::string csv_path = tmp().file("spectrum_id.csv");
    const CliResult r = run_cli("spectrum " + tmp().file("w0.lqmx") + " --profile " +
                                tmp().file("ones64.json") + " --out " + csv_path);
    CHECK(r.exit_code == 0);
    const auto rows = parse_csv(read_file(csv_path));
    REQUIRE(rows.size() == 65);  // header + min(64, 64)
    CHECK(rows[0] == std::vector<std::string>{"index", "sigma_plain", "sigma_scaled"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double plain = std::stod(rows[i][1]);
        const double scaled = std::stod(rows[i][2]);
        CHECK(std::abs(plain - scaled) <= 1e-10 * std::max(1e-30, scaled));
    }
}

TEST_CASE("spectrum: energies of the two columns match for a skewed profile") {
    // profile from the outlier-heavy activations written earlier
    REQUIRE(run_cli("calibrate " + tmp().file("x.lqmx") + " --out " +
                    tmp().file("outlier.json")).exit_code == 0);
    const std::string csv_path = tmp().file("spectrum_out.csv");
    const CliResult r = run_cli("spectrum " + tmp().file("w0.lqmx") + " --profile " +
                                tmp().file("outlier.json") + " --out " + csv_path);
    CHECK(r.exit_code == 0);
    const auto rows = parse_csv(read_file(csv_path));
    double plain2 = 0.0, scaled2 = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        plain2 += std::stod(rows[i][1]) * std::stod(rows[i][1]);
        scaled2 += std::stod(rows[i][2]) * std::stod(rows[i][2]);
    }
    CHECK(std::abs(plain2 - scaled2) <= 1e-10 * scaled2);
}

TEST_CASE("rank-sweep: full rank without snapping reaches the reference") {
    REQUIRE(run_cli("synth --kind weights --rows 64 --cols 48 --seed 21 --out " +
                    tmp().file("w1.lqmx")).exit_code == 0);
    const std::string csv_path = tmp().file("sweep.csv");
    const CliResult r = run_cli("rank-sweep " + tmp().file("w0.lqmx") + " " +
                                tmp().file("w1.lqmx") + " --activations " + tmp().file("x.lqmx") +
                                " --methods lqer,l2qer --k 1,4,16,64 --act-bits 0 "
                                "--factor-bits 0 --out " + csv_path);
    CHECK(r.exit_code == 0);
    const auto rows = parse_csv(read_file(csv_path));
    REQUIRE(rows.size() == 9);  // header + 2 methods x 4 ranks
    CHECK(rows[0] == std::vector<std::string>{"method", "k", "layer0_rel", "layer1_rel",
                                              "end_to_end_rel"});
    // per-layer lqer errors are non-increasing in k, and the largest swept k
    // (full rank at every layer) drives the end-to-end error to roundoff
    double prev0 = 2.0, prev1 = 2.0;
    for (std::size_t i = 1; i <= 4; ++i) {
        CHECK(rows[i][0] == "lqer");
        const double l0 = std::stod(rows[i][2]);
        const double l1 = std::stod(rows[i][3]);
        CHECK(l0 <= prev0 + 1e-12);
        CHECK(l1 <= prev1 + 1e-12);
        prev0 = l0;
        prev1 = l1;
    }
    CHECK(std::stod(rows[4][4]) <= 1e-9);   // lqer  k=64
    CHECK(std::stod(rows[8][4]) <= 1e-9);   // l2qer k=64
}

TEST_CASE("eval reproduces bundle outputs and reports errors against references") {
    const std::string bundle_path = tmp().file("w4k8.lqbd");
    const std::string w = tmp().file("w0.lqmx");
    const std::string x = tmp().file("x.lqmx");
    const CliResult r = run_cli("eval --bundle " + bundle_path + " --activations " + x +
                                " --weights " + w + " --out-prefix " + tmp().file("y"));
    CHECK(r.exit_code == 0);

    const Bundle bundle = load_bundle(bundle_path);
    const DenseMatrix input = load_matrix(x);
    const DenseMatrix expected = forward(bundle.layers[0], input);
    CHECK(load_matrix(tmp().file("y_0.lqmx")) == expected);

    const OutputError err = output_error(matmul(input, load_matrix(w)), expected);
    CHECK(metric(r.out, "rel_frobenius") == format_double(err.rel_frobenius));

    const CliResult again = run_cli("eval --bundle " + bundle_path + " --activations " + x);
    CHECK(again.exit_code == 0);
    CHECK(metric(again.out, "output_fnv") == metric(r.out, "output_fnv"));
}

TEST_CASE("report prints the closed-form accounting") {
    const CliResult r = run_cli("report --dims 4096x4096 --k 0");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("4096,4096,0,4.25,0") != std::string::npos);

    const CliResult i = run_cli("report --dims 4096x4096 --k 0 --format int --group 128");
    CHECK(i.out.find("4.125") != std::string::npos);

    // wide FFN shape: correction overhead stays a third of a percent at k=32
    const CliResult o = run_cli("report --dims 12288x49152 --k 32");
    const auto rows = parse_csv(o.out);
    REQUIRE(rows.size() >= 2);
    const double overhead = std::stod(rows[1][4]);
    CHECK(overhead == doctest::Approx(0.0033).epsilon(0.02));
}

TEST_CASE("error paths map to the documented exit codes") {
    CHECK(run_cli("quantize --out x.lqbd").exit_code == 2);          // missing weights
    CHECK(run_cli("nonsense").exit_code == 2);                       // unknown verb
    CHECK(run_cli("--help").exit_code == 0);

    const std::string garbage = tmp().file("garbage.lqmx");
    {
        std::ofstream out(garbage, std::ios::binary);
        out << "this is not a matrix";
    }
    CHECK(run_cli("quantize " + garbage + " --out " + tmp().file("g.lqbd")).exit_code == 3);

    // l2qer without --profile
    CHECK(run_cli("quantize " + tmp().file("w0.lqmx") + " --method l2qer --out " +
                  tmp().file("nope.lqbd")).exit_code == 2);

    CHECK(run_cli("report --dims 64xnope --k 1").exit_code == 2);
    CHECK(run_cli("report --dims 64 --k 1").exit_code == 2);
}
