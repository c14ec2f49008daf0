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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lqer/calibration.hpp"
#include "lqer/error.hpp"
#include "lqer/io.hpp"
#include "lqer/layer.hpp"
#include "lqer/matrix.hpp"
#include "lqer/quant.hpp"
#include "lqer/reconstruction.hpp"
#include "lqer/svd.hpp"

namespace {

using namespace lqer;

// Shared number-format flags. --format selects mxint (shared-exponent blocks)
// or int (per-group real scales).
struct FormatOptions {
    std::string format = "mxint";
    int bits = 4;
    int exp_bits = 4;
    std::size_t block = 16;
    std::size_t group = 128;

    QuantConfig weight_config() const {
        if (format == "mxint") {
            return QuantConfig::mxint(bits, exp_bits, block, BlockOrientation::along_col);
        }
        if (format == "int") {
            return QuantConfig::int_grouped(bits, group, BlockOrientation::along_row);
        }
        throw ArgumentError("unknown format '" + format + "', expected mxint or int");
    }
};

void add_format_flags(CLI::App* cmd, FormatOptions& fmt) {
    cmd->add_option("--format", fmt.format, "number format: mxint or int")
        ->default_val("mxint");
    cmd->add_option("--bits", fmt.bits, "weight mantissa bits")->default_val(4);
    cmd->add_option("--exp-bits", fmt.exp_bits, "shared exponent bits (mxint)")->default_val(4);
    cmd->add_option("--block", fmt.block, "mxint block size")->default_val(16);
    cmd->add_option("--group", fmt.group, "int format group size")->default_val(128);
}

struct PipelineOptions {
    int act_bits = 8;       // 0 disables activation snapping
    int act_exp_bits = 8;
    int factor_bits = 8;    // 0 disables factor snapping
};

void add_pipeline_flags(CLI::App* cmd, PipelineOptions& pipe) {
    cmd->add_option("--act-bits", pipe.act_bits,
                    "activation mantissa bits, 0 keeps activations exact")
        ->default_val(8);
    cmd->add_option("--act-exp-bits", pipe.act_exp_bits, "activation shared exponent bits")
        ->default_val(8);
    cmd->add_option("--factor-bits", pipe.factor_bits,
                    "low-rank factor mantissa bits, 0 keeps factors exact")
        ->default_val(8);
}

std::optional<QuantConfig> act_config(const PipelineOptions& pipe) {
    if (pipe.act_bits == 0) return std::nullopt;
    return QuantConfig::mxint(pipe.act_bits, pipe.act_exp_bits, 16, BlockOrientation::along_row);
}

std::optional<QuantConfig> factor_config(const PipelineOptions& pipe) {
    if (pipe.factor_bits == 0) return std::nullopt;
    return QuantConfig::mxint(pipe.factor_bits, 4, 16, BlockOrientation::along_col);
}

// 0 asks for the format-dependent default, clamped to the layer shape.
std::size_t resolve_rank(std::size_t k, int weight_bits, std::size_t m, std::size_t n) {
    if (k == 0) k = weight_bits >= 4 ? 32 : 256;
    return std::min(k, std::min(m, n));
}

std::uint64_t fnv1a_bytes(const std::vector<double>& values) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double d : values) {
        std::uint64_t v;
        static_assert(sizeof(v) == sizeof(d));
        std::memcpy(&v, &d, sizeof(v));
        for (std::size_t i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing", 0);
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

// --- synth ------------------------------------------------------------------

int cmd_synth(const std::string& kind, std::size_t rows, std::size_t cols, std::size_t tokens,
              std::size_t outlier_channels, double outlier_gain, double spread,
              std::uint64_t seed, const std::string& out) {
    if (kind == "weights") {
        save_matrix(out, synth_weights(rows, cols, seed));
        std::cout << "wrote " << rows << "x" << cols << " weights to " << out << "\n";
        return 0;
    }
    if (kind == "activations") {
        SynthActivationConfig cfg;
        cfg.channels = cols;
        cfg.tokens = tokens;
        cfg.outlier_channels = outlier_channels;
        cfg.outlier_gain = outlier_gain;
        cfg.base_scale_spread = spread;
        cfg.seed = seed;
        save_matrix(out, synth_activations(cfg));
        std::cout << "wrote " << tokens << "x" << cols << " activations to " << out << "\n";
        return 0;
    }
    throw ArgumentError("unknown synth kind '" + kind + "', expected weights or activations");
}

// --- calibrate ----------------------------------------------------------------

int cmd_calibrate(const std::vector<std::string>& inputs, const std::string& out,
                  bool floor_dead, std::size_t max_samples) {
    std::vector<DenseMatrix> samples;
    for (const std::string& path : inputs) {
        if (samples.size() >= max_samples) break;
        samples.push_back(load_matrix(path));
    }
    std::vector<double> a_bar = profile_channels(samples);

    ProfileFile file;
    if (floor_dead) {
        const bool had_dead = std::any_of(a_bar.begin(), a_bar.end(),
                                          [](double v) { return !(v > 0.0); });
        a_bar = floor_dead_channels(std::move(a_bar));
        file.dead_channel_policy = had_dead ? "floored" : "error";
    }
    file.profile = scale_matrix(std::move(a_bar), samples.size());
    save_profile(out, file);

    const auto [a_lo, a_hi] = std::minmax_element(file.profile.a_bar.begin(),
                                                  file.profile.a_bar.end());
    const auto [s_lo, s_hi] = std::minmax_element(file.profile.s_diag.begin(),
                                                  file.profile.s_diag.end());
    std::cout << "channels=" << file.profile.channels
              << " samples=" << file.profile.sample_count
              << " a_bar_min=" << format_double(*a_lo)
              << " a_bar_max=" << format_double(*a_hi)
              << " condition=" << format_double(*s_hi / *s_lo) << "\n";
    return 0;
}

// --- quantize -----------------------------------------------------------------

int cmd_quantize(const std::vector<std::string>& weight_paths, const std::string& out,
                 const FormatOptions& fmt, const PipelineOptions& pipe,
                 const std::string& method_name_str, std::size_t k,
                 const std::string& profile_path, std::uint64_t seed) {
    const Method method = parse_method(method_name_str);
    std::optional<CalibrationProfile> profile;
    std::uint64_t phash = 0;
    if (!profile_path.empty()) {
        profile = load_profile(profile_path).profile;
        phash = profile_hash(*profile);
    }
    if (method == Method::l2qer && !profile) {
        throw ArgumentError("method l2qer requires --profile");
    }

    Bundle bundle;
    bundle.seed = seed;
    bundle.profile_hash = phash;
    const QuantConfig weight_cfg = fmt.weight_config();
    for (std::size_t i = 0; i < weight_paths.size(); ++i) {
        const DenseMatrix w = load_matrix(weight_paths[i]);
        const std::size_t rank = resolve_rank(k, fmt.bits, w.rows(), w.cols());
        LqerLayer layer = build_layer(w, weight_cfg, method, rank, profile, act_config(pipe),
                                      factor_config(pipe));

        const DenseMatrix e_q = quant_error(w, layer.w_q);
        double e_a = 0.0, rel = 0.0;
        if (layer.correction) {
            const ErrorReport report = approximation_error(e_q, *layer.correction);
            e_a = report.e_a;
            rel = report.rel_frobenius;
        } else {
            double abs_sum = 0.0;
            for (double v : e_q.values()) abs_sum += std::abs(v);
            e_a = abs_sum / static_cast<double>(e_q.values().size());
            const double norm = frobenius_norm(e_q);
            rel = norm / std::max(norm, 1e-30);
        }
        std::cout << "layer " << i << ": e_a=" << format_double(e_a)
                  << " rel_frobenius=" << format_double(rel) << "\n";

        layer.reference_w.reset();  // bundles carry only what forward needs
        bundle.layers.push_back(std::move(layer));
    }
    save_bundle(out, bundle);
    std::cout << "wrote bundle with " << bundle.layers.size() << " layer(s) to " << out << "\n";
    return 0;
}

// --- spectrum -----------------------------------------------------------------

int cmd_spectrum(const std::string& weight_path, const std::string& profile_path,
                 const std::string& out, const FormatOptions& fmt) {
    const DenseMatrix w = load_matrix(weight_path);
    const CalibrationProfile profile = load_profile(profile_path).profile;
    const QuantizedMatrix w_q = quantize_matrix(w, fmt.weight_config());
    const SpectrumPair pair = normalized_spectra(quant_error(w, w_q), profile);

    std::string csv = "index,sigma_plain,sigma_scaled\n";
    for (std::size_t i = 0; i < pair.sigma_plain.size(); ++i) {
        csv += std::to_string(i) + "," + format_double(pair.sigma_plain[i]) + "," +
               format_double(pair.sigma_scaled[i]) + "\n";
    }
    write_text(out, csv);
    std::cout << "wrote " << pair.sigma_plain.size() << " singular values to " << out << "\n";
    return 0;
}

// --- rank-sweep ---------------------------------------------------------------

int cmd_rank_sweep(const std::vector<std::string>& weight_paths,
                   const std::string& activations_path, const std::string& methods_csv,
                   const std::vector<std::size_t>& ks, const std::string& out,
                   const FormatOptions& fmt, const PipelineOptions& pipe) {
    const DenseMatrix activations = load_matrix(activations_path);

    std::vector<HarnessLayer> layers;
    for (std::size_t i = 0; i < weight_paths.size(); ++i) {
        const Nonlinearity nl =
            i + 1 < weight_paths.size() ? Nonlinearity::relu : Nonlinearity::none;
        layers.push_back(HarnessLayer{load_matrix(weight_paths[i]), nl});
    }

    std::vector<Method> methods;
    for (std::size_t start = 0; start < methods_csv.size();) {
        const std::size_t comma = methods_csv.find(',', start);
        const std::size_t end = comma == std::string::npos ? methods_csv.size() : comma;
        methods.push_back(parse_method(methods_csv.substr(start, end - start)));
        start = end + 1;
    }
    if (methods.empty()) throw ArgumentError("--methods must name at least one method");

    std::string csv = "method,k";
    for (std::size_t l = 0; l < layers.size(); ++l) {
        csv += ",layer" + std::to_string(l) + "_rel";
    }
    csv += ",end_to_end_rel\n";

    for (Method method : methods) {
        // plain ignores the rank, so it contributes a single k=0 row
        std::vector<std::size_t> ranks = method == Method::plain ? std::vector<std::size_t>{0}
                                                                 : ks;
        for (std::size_t k : ranks) {
            HarnessConfig cfg{fmt.weight_config(), method, k, act_config(pipe),
                              factor_config(pipe)};
            const HarnessReport report = run_harness(layers, cfg, activations, {activations});
            csv += std::string(method_name(method)) + "," + std::to_string(k);
            for (const LayerError& le : report.per_layer) {
                csv += "," + format_double(le.isolated_rel);
            }
            csv += "," + format_double(report.end_to_end_rel) + "\n";
        }
    }
    write_text(out, csv);
    std::cout << "wrote rank sweep to " << out << "\n";
    return 0;
}

// --- eval ---------------------------------------------------------------------

int cmd_eval(const std::string& bundle_path, const std::string& activations_path,
             const std::vector<std::string>& weight_paths, const std::string& out_prefix) {
    const Bundle bundle = load_bundle(bundle_path);
    const DenseMatrix x = load_matrix(activations_path);
    if (!weight_paths.empty() && weight_paths.size() != bundle.layers.size()) {
        throw ArgumentError("got " + std::to_string(weight_paths.size()) +
                            " reference weights for " + std::to_string(bundle.layers.size()) +
                            " bundle layers");
    }

    for (std::size_t i = 0; i < bundle.layers.size(); ++i) {
        const DenseMatrix y = forward(bundle.layers[i], x);
        std::cout << "layer " << i << ": output_fnv=" << std::hex << fnv1a_bytes(y.values())
                  << std::dec;
        if (!weight_paths.empty()) {
            const DenseMatrix y_ref = matmul(x, load_matrix(weight_paths[i]));
            const OutputError err = output_error(y_ref, y);
            std::cout << " rel_frobenius=" << format_double(err.rel_frobenius)
                      << " max_abs=" << format_double(err.max_abs);
        }
        std::cout << "\n";
        if (!out_prefix.empty()) {
            save_matrix(out_prefix + "_" + std::to_string(i) + ".lqmx", y);
        }
    }
    return 0;
}

// --- report ---------------------------------------------------------------------

std::size_t parse_count(const std::string& text, const std::string& context) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
        throw ArgumentError("bad " + context + " '" + text + "', expected a positive integer");
    }
    return std::stoull(text);
}

int cmd_report(const std::string& dims_csv, std::size_t k, const FormatOptions& fmt,
               const PipelineOptions& pipe) {
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    for (std::size_t start = 0; start < dims_csv.size();) {
        const std::size_t comma = dims_csv.find(',', start);
        const std::size_t end = comma == std::string::npos ? dims_csv.size() : comma;
        const std::string item = dims_csv.substr(start, end - start);
        const std::size_t x = item.find('x');
        if (x == std::string::npos) {
            throw ArgumentError("bad dims entry '" + item + "', expected MxN");
        }
        dims.emplace_back(parse_count(item.substr(0, x), "dims entry"),
                          parse_count(item.substr(x + 1), "dims entry"));
        start = end + 1;
    }
    if (dims.empty()) throw ArgumentError("--dims must list at least one MxN shape");

    const QuantConfig low = fmt.weight_config();
    const QuantConfig high = factor_config(pipe).value_or(default_factor_quant());

    double weighted_bits = 0.0;
    double total_elems = 0.0;
    std::cout << "m,n,k,avg_bits,overhead\n";
    for (const auto& [m, n] : dims) {
        const double bits = avg_bitwidth(low, m, n, k, high);
        const double overhead = k == 0 ? 0.0 : overhead_fraction(m, n, k);
        std::cout << m << "," << n << "," << k << "," << format_double(bits) << ","
                  << format_double(overhead) << "\n";
        const double elems = static_cast<double>(m) * static_cast<double>(n);
        weighted_bits += bits * elems;
        total_elems += elems;
    }
    std::cout << "weighted_avg_bits=" << format_double(weighted_bits / total_elems) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantize weight matrices to low-precision block formats and reconstruct the "
                 "quantization error with activation-aware low-rank corrections"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "emit synthetic weight or activation files");
    std::string synth_kind = "weights", synth_out;
    std::size_t synth_rows = 64, synth_cols = 64, synth_tokens = 128, synth_outliers = 0;
    double synth_gain = 1.0, synth_spread = 0.0;
    std::uint64_t synth_seed = 0;
    synth->add_option("--kind", synth_kind, "weights or activations")->required();
    synth->add_option("--rows", synth_rows, "weight rows")->default_val(64);
    synth->add_option("--cols", synth_cols, "weight cols / activation channels")->default_val(64);
    synth->add_option("--tokens", synth_tokens, "activation rows")->default_val(128);
    synth->add_option("--outlier-channels", synth_outliers,
                      "leading channels boosted by --outlier-gain")->default_val(0);
    synth->add_option("--outlier-gain", synth_gain, "magnitude boost, >= 1")->default_val(1.0);
    synth->add_option("--spread", synth_spread, "log-normal spread of channel scales")
        ->default_val(0.0);
    synth->add_option("--seed", synth_seed, "random seed")->default_val(0);
    synth->add_option("--out", synth_out, "output path")->required();

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate",
                                         "profile activation samples into a scale profile");
    std::vector<std::string> cal_inputs;
    std::string cal_out;
    bool cal_floor = false;
    std::size_t cal_max_samples = 32;
    calibrate->add_option("inputs", cal_inputs, "activation sample files")->required();
    calibrate->add_option("--out", cal_out, "profile output path")->required();
    calibrate->add_flag("--floor-dead-channels", cal_floor,
                        "floor dead channels instead of failing");
    calibrate->add_option("--max-samples", cal_max_samples, "sample cap")->default_val(32);

    // quantize
    auto* quantize = app.add_subcommand("quantize",
                                        "quantize weights and build correction factors");
    std::vector<std::string> q_weights;
    std::string q_out, q_method = "lqer", q_profile;
    std::size_t q_k = 0;
    std::uint64_t q_seed = 0;
    FormatOptions q_fmt;
    PipelineOptions q_pipe;
    quantize->add_option("weights", q_weights, "weight matrix files, one per layer")->required();
    quantize->add_option("--out", q_out, "bundle output path")->required();
    quantize->add_option("--method", q_method, "plain, lqer, or l2qer")->default_val("lqer");
    quantize->add_option("--k", q_k, "correction rank, 0 = format default")->default_val(0);
    quantize->add_option("--profile", q_profile, "calibration profile (required for l2qer)");
    quantize->add_option("--seed", q_seed, "provenance seed recorded in the bundle")
        ->default_val(0);
    add_format_flags(quantize, q_fmt);
    add_pipeline_flags(quantize, q_pipe);

    // spectrum
    auto* spectrum = app.add_subcommand("spectrum",
                                        "dump plain and scaled error spectra as CSV");
    std::string sp_weight, sp_profile, sp_out;
    FormatOptions sp_fmt;
    spectrum->add_option("weight", sp_weight, "weight matrix file")->required();
    spectrum->add_option("--profile", sp_profile, "calibration profile")->required();
    spectrum->add_option("--out", sp_out, "CSV output path")->required();
    add_format_flags(spectrum, sp_fmt);

    // rank-sweep
    auto* sweep = app.add_subcommand("rank-sweep",
                                     "sweep correction ranks over a layer chain");
    std::vector<std::string> sw_weights;
    std::vector<std::size_t> sw_ks;
    std::string sw_acts, sw_methods = "plain,lqer,l2qer", sw_out;
    FormatOptions sw_fmt;
    PipelineOptions sw_pipe;
    sweep->add_option("weights", sw_weights, "weight matrix files, chained in order")->required();
    sweep->add_option("--activations", sw_acts, "evaluation/calibration activations")->required();
    sweep->add_option("--methods", sw_methods, "comma list of methods")
        ->default_val("plain,lqer,l2qer");
    sweep->add_option("--k", sw_ks, "ranks to sweep")->required()->delimiter(',');
    sweep->add_option("--out", sw_out, "CSV output path")->required();
    add_format_flags(sweep, sw_fmt);
    add_pipeline_flags(sweep, sw_pipe);

    // eval
    auto* eval = app.add_subcommand("eval", "run a saved bundle forward over activations");
    std::string ev_bundle, ev_acts, ev_prefix;
    std::vector<std::string> ev_weights;
    eval->add_option("--bundle", ev_bundle, "bundle file")->required();
    eval->add_option("--activations", ev_acts, "activation matrix file")->required();
    eval->add_option("--weights", ev_weights, "reference weights for error reporting");
    eval->add_option("--out-prefix", ev_prefix, "save outputs as <prefix>_<i>.lqmx");

    // report
    auto* report = app.add_subcommand("report", "storage and overhead accounting per shape");
    std::string rp_dims;
    std::size_t rp_k = 0;
    FormatOptions rp_fmt;
    PipelineOptions rp_pipe;
    report->add_option("--dims", rp_dims, "comma list of MxN shapes")->required();
    report->add_option("--k", rp_k, "correction rank (0 = no correction)")->default_val(0);
    add_format_flags(report, rp_fmt);
    add_pipeline_flags(report, rp_pipe);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_kind, synth_rows, synth_cols, synth_tokens, synth_outliers,
                             synth_gain, synth_spread, synth_seed, synth_out);
        }
        if (calibrate->parsed()) {
            return cmd_calibrate(cal_inputs, cal_out, cal_floor, cal_max_samples);
        }
        if (quantize->parsed()) {
            return cmd_quantize(q_weights, q_out, q_fmt, q_pipe, q_method, q_k, q_profile,
                                q_seed);
        }
        if (spectrum->parsed()) {
            return cmd_spectrum(sp_weight, sp_profile, sp_out, sp_fmt);
        }
        if (sweep->parsed()) {
            return cmd_rank_sweep(sw_weights, sw_acts, sw_methods, sw_ks, sw_out, sw_fmt,
                                  sw_pipe);
        }
        if (eval->parsed()) {
            return cmd_eval(ev_bundle, ev_acts, ev_weights, ev_prefix);
        }
        if (report->parsed()) {
            return cmd_report(rp_dims, rp_k, rp_fmt, rp_pipe);
        }
    } catch (const lqer::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
