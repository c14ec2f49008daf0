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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "lqer/calibration.hpp"
#include "lqer/matrix.hpp"
#include "lqer/quant.hpp"
#include "lqer/reconstruction.hpp"

namespace lqer {

// A reconstructed linear layer: quantized weights plus an optional rank-k
// correction. forward() computes X_q * dq(W_q) + (X_q * a_k) * b_k where X_q
// is the activation matrix snapped to act_quant (or X itself when absent).
// The low-rank path always consumes the same snapped activations as the main
// path, and the two paths are computed separately and then added, so the
// corrected forward equals the plain forward plus the correction term
// entry-wise exactly.
struct LqerLayer {
    QuantizedMatrix w_q;
    std::optional<LowRankCorrection> correction;
    std::optional<QuantConfig> act_quant;
    std::optional<DenseMatrix> reference_w;  // kept for diagnostics, never used in forward
};

LqerLayer build_layer(const DenseMatrix& w, const QuantConfig& cfg, Method method, std::size_t k,
                      const std::optional<CalibrationProfile>& profile = {},
                      const std::optional<QuantConfig>& act_quant = {},
                      const std::optional<QuantConfig>& factor_quant = {});

DenseMatrix forward(const LqerLayer& layer, const DenseMatrix& x);

struct OutputError {
    double rel_frobenius;  // ||Y - Y~||_F / max(||Y||_F, 1e-30)
    double max_abs;
};
OutputError output_error(const DenseMatrix& y_ref, const DenseMatrix& y_approx);

// Synthetic activations with channel-magnitude structure: entry (i, j) is
// g_j * z_ij with z standard normal and g_j log-normal with the given spread;
// the leading outlier_channels channels are additionally multiplied by
// outlier_gain. Deterministic per seed.
struct SynthActivationConfig {
    std::size_t channels = 64;
    std::size_t tokens = 128;
    std::size_t outlier_channels = 0;
    double outlier_gain = 1.0;       // >= 1
    double base_scale_spread = 0.0;  // sigma of log(g_j)
    std::uint64_t seed = 0;
};
DenseMatrix synth_activations(const SynthActivationConfig& cfg);

// Gaussian weights scaled by 1/sqrt(rows) so chained layers keep activation
// magnitudes roughly stable. Deterministic per seed.
DenseMatrix synth_weights(std::size_t rows, std::size_t cols, std::uint64_t seed);

enum class Nonlinearity : std::uint8_t { none = 0, relu = 1 };

struct HarnessLayer {
    DenseMatrix w;
    Nonlinearity nonlinearity = Nonlinearity::none;
};

struct HarnessConfig {
    QuantConfig weight_quant;
    Method method = Method::plain;
    std::size_t k = 0;
    std::optional<QuantConfig> act_quant;
    std::optional<QuantConfig> factor_quant;
};

// Per-layer reconstruction quality along the chain. isolated_rel feeds the
// reference input into the approximate layer; accumulated_rel compares the
// full approximate chain against the reference chain at that layer's
// (pre-nonlinearity) output.
struct LayerError {
    double isolated_rel;
    double accumulated_rel;
    double accumulated_max_abs;
};

struct HarnessReport {
    std::vector<LayerError> per_layer;
    double end_to_end_rel;
    double end_to_end_max_abs;
};

// Runs the reference chain in double precision and the approximate chain with
// quantized layers over the same eval input. For l2qer each layer's profile
// is computed from the calibration samples as they flow through the
// approximate chain, mirroring deployment. The rank is clamped per layer to
// min(rows, cols), so one k can sweep a chain of mixed shapes up to full
// rank everywhere.
HarnessReport run_harness(const std::vector<HarnessLayer>& layers, const HarnessConfig& cfg,
                          const DenseMatrix& eval_input,
                          const std::vector<DenseMatrix>& calibration_samples = {});

}  // namespace lqer
