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
#include <optional>
#include <string>
#include <vector>

#include "lqer/calibration.hpp"
#include "lqer/matrix.hpp"
#include "lqer/quant.hpp"
#include "lqer/svd.hpp"

namespace lqer {

enum class Method : std::uint8_t {
    plain = 0,  // quantized weights only, no correction
    lqer = 1,   // rank-k SVD of the quantization error
    l2qer = 2,  // rank-k SVD of the activation-scaled quantization error
};

const char* method_name(Method m);
Method parse_method(const std::string& name);  // throws ArgumentError

// Rank-k correction factors: a_k (m x k) and b_k (k x n) approximate the
// quantization error as a_k * b_k. For l2qer the row scaling applied before
// the SVD is already folded back into a_k.
struct LowRankCorrection {
    DenseMatrix a_k;
    DenseMatrix b_k;
    std::size_t rank;
    Method method;
    std::optional<QuantConfig> factor_quant;  // snap applied to both factors
};

// Reconstruction quality of a correction against the error it approximates:
// e_a is the mean absolute entry of E - a_k * b_k, rel_frobenius the
// Frobenius-relative residual.
struct ErrorReport {
    double e_a;
    double rel_frobenius;
    std::size_t rank;
};

// E = W - dequantize(W_q); shapes must match.
DenseMatrix quant_error(const DenseMatrix& w, const QuantizedMatrix& w_q);

// Rank-k truncated SVD of the error: a_k = U_k, b_k = diag(sigma_k) * V_k^T.
// A zero error yields explicit zero factors. If factor_quant is set, both
// factors are value-snapped to that format after composition.
LowRankCorrection lqer_factors(const DenseMatrix& e_q, std::size_t k,
                               const std::optional<QuantConfig>& factor_quant = {});

// Same, but the SVD runs on the row-scaled error S * E and the inverse scale
// is folded into a_k, so a_k * b_k still approximates E while the truncation
// favours rows with large activation magnitudes.
LowRankCorrection l2qer_factors(const DenseMatrix& e_q, const CalibrationProfile& profile,
                                std::size_t k,
                                const std::optional<QuantConfig>& factor_quant = {});

ErrorReport approximation_error(const DenseMatrix& e_q, const LowRankCorrection& corr);

// Singular values of S * E next to those of alpha * E, with alpha chosen so
// both spectra carry the same total energy. Rejects a zero error matrix.
struct SpectrumPair {
    std::vector<double> sigma_plain;
    std::vector<double> sigma_scaled;
};
SpectrumPair normalized_spectra(const DenseMatrix& e_q, const CalibrationProfile& profile);

}  // namespace lqer
