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

#include "lqer/layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqer/error.hpp"
#include "lqer/rng.hpp"

namespace lqer {

LqerLayer build_layer(const DenseMatrix& w, const QuantConfig& cfg, Method method, std::size_t k,
                      const std::optional<CalibrationProfile>& profile,
                      const std::optional<QuantConfig>& act_quant,
                      const std::optional<QuantConfig>& factor_quant) {
    LqerLayer layer;
    layer.w_q = quantize_matrix(w, cfg);
    layer.act_quant = act_quant;
    layer.reference_w = w;

    if (method == Method::plain) return layer;

    const DenseMatrix e_q = quant_error(w, layer.w_q);
    if (method == Method::lqer) {
        layer.correction = lqer_factors(e_q, k, factor_quant);
    } else {
        if (!profile) {
            throw ArgumentError("l2qer requires a calibration profile");
        }
        layer.correction = l2qer_factors(e_q, *profile, k, factor_quant);
    }
    return layer;
}

DenseMatrix forward(const LqerLayer& layer, const DenseMatrix& x) {
    if (x.cols() != layer.w_q.rows) {
        throw ShapeError("input has " + std::to_string(x.cols()) + " columns, layer expects " +
                         std::to_string(layer.w_q.rows));
    }
    const DenseMatrix x_q = layer.act_quant ? snap_matrix(x, *layer.act_quant) : x;
    DenseMatrix y = matmul(x_q, dequantize_matrix(layer.w_q));
    if (layer.correction) {
        const DenseMatrix low_rank = matmul(matmul(x_q, layer.correction->a_k),
                                            layer.correction->b_k);
        y = add(y, low_rank);
    }
    return y;
}

OutputError output_error(const DenseMatrix& y_ref, const DenseMatrix& y_approx) {
    const DenseMatrix diff = subtract(y_ref, y_approx);
    const double denom = std::max(frobenius_norm(y_ref), 1e-30);
    return OutputError{frobenius_norm(diff) / denom, max_abs_diff(y_ref, y_approx)};
}

DenseMatrix synth_activations(const SynthActivationConfig& cfg) {
    if (cfg.outlier_channels > cfg.channels) {
        throw ArgumentError("outlier channel count exceeds channel count");
    }
    if (cfg.outlier_gain < 1.0) {
        throw ArgumentError("outlier gain must be at least 1");
    }
    Rng rng(cfg.seed);
    std::vector<double> gain(cfg.channels);
    for (std::size_t j = 0; j < cfg.channels; ++j) {
        gain[j] = std::exp(cfg.base_scale_spread * rng.gaussian());
    }
    for (std::size_t j = 0; j < cfg.outlier_channels; ++j) gain[j] *= cfg.outlier_gain;

    DenseMatrix x(cfg.tokens, cfg.channels);
    for (std::size_t i = 0; i < cfg.tokens; ++i) {
        for (std::size_t j = 0; j < cfg.channels; ++j) {
            x(i, j) = gain[j] * rng.gaussian();
        }
    }
    return x;
}

DenseMatrix synth_weights(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
    DenseMatrix w(rows, cols);
    for (double& v : w.values()) v = scale * rng.gaussian();
    return w;
}

namespace {

DenseMatrix apply_nonlinearity(DenseMatrix y, Nonlinearity nl) {
    if (nl == Nonlinearity::relu) {
        for (double& v : y.values()) v = std::max(v, 0.0);
    }
    return y;
}

}  // namespace

HarnessReport run_harness(const std::vector<HarnessLayer>& layers, const HarnessConfig& cfg,
                          const DenseMatrix& eval_input,
                          const std::vector<DenseMatrix>& calibration_samples) {
    if (layers.empty()) {
        throw ArgumentError("harness needs at least one layer");
    }
    std::size_t expect = eval_input.cols();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].w.rows() != expect) {
            throw ShapeError("layer " + std::to_string(l) + " expects " +
                             std::to_string(layers[l].w.rows()) + " input channels, got " +
                             std::to_string(expect));
        }
        expect = layers[l].w.cols();
    }
    if (cfg.method == Method::l2qer && calibration_samples.empty()) {
        throw ArgumentError("l2qer harness runs need calibration samples");
    }

    // Build layer by layer; for l2qer the profile for layer l comes from the
    // calibration samples after they have passed through the approximate
    // layers 0..l-1.
    std::vector<DenseMatrix> calib = calibration_samples;
    std::vector<LqerLayer> built;
    built.reserve(layers.size());
    for (const HarnessLayer& entry : layers) {
        std::optional<CalibrationProfile> profile;
        if (cfg.method == Method::l2qer) {
            profile = scale_matrix(profile_channels(calib), calib.size());
        }
        const std::size_t k = std::min(cfg.k, std::min(entry.w.rows(), entry.w.cols()));
        built.push_back(build_layer(entry.w, cfg.weight_quant, cfg.method, k, profile,
                                    cfg.act_quant, cfg.factor_quant));
        if (cfg.method == Method::l2qer) {
            for (DenseMatrix& sample : calib) {
                sample = apply_nonlinearity(forward(built.back(), sample), entry.nonlinearity);
            }
        }
    }

    HarnessReport report;
    DenseMatrix x_ref = eval_input;
    DenseMatrix x_app = eval_input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseMatrix y_ref = matmul(x_ref, layers[l].w);
        const DenseMatrix y_iso = forward(built[l], x_ref);
        const DenseMatrix y_app = forward(built[l], x_app);
        const OutputError acc = output_error(y_ref, y_app);
        report.per_layer.push_back(LayerError{output_error(y_ref, y_iso).rel_frobenius,
                                              acc.rel_frobenius, acc.max_abs});
        x_ref = apply_nonlinearity(y_ref, layers[l].nonlinearity);
        x_app = apply_nonlinearity(y_app, layers[l].nonlinearity);
    }
    const OutputError final_err = output_error(x_ref, x_app);
    report.end_to_end_rel = final_err.rel_frobenius;
    report.end_to_end_max_abs = final_err.max_abs;
    return report;
}

}  // namespace lqer
