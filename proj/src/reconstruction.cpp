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

#include "lqer/reconstruction.hpp"

#include <cmath>
#include <string>

#include "lqer/error.hpp"

namespace lqer {

const char* method_name(Method m) {
    switch (m) {
        case Method::plain: return "plain";
        case Method::lqer: return "lqer";
        case Method::l2qer: return "l2qer";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "plain") return Method::plain;
    if (name == "lqer") return Method::lqer;
    if (name == "l2qer") return Method::l2qer;
    throw ArgumentError("unknown method '" + name + "', expected plain, lqer, or l2qer");
}

DenseMatrix quant_error(const DenseMatrix& w, const QuantizedMatrix& w_q) {
    if (w.rows() != w_q.rows || w.cols() != w_q.cols) {
        throw ShapeError("weight is " + std::to_string(w.rows()) + "x" +
                         std::to_string(w.cols()) + ", quantized matrix is " +
                         std::to_string(w_q.rows) + "x" + std::to_string(w_q.cols));
    }
    return subtract(w, dequantize_matrix(w_q));
}

namespace {

void check_rank(std::size_t k, std::size_t m, std::size_t n) {
    const std::size_t max_k = std::min(m, n);
    if (k < 1 || k > max_k) {
        throw ArgumentError("rank " + std::to_string(k) + " out of range [1, " +
                            std::to_string(max_k) + "]");
    }
}

// b_k = diag(sigma_k) * V_k^T: sigma is composed into the right factor, which
// is what gets stored and snapped.
DenseMatrix compose_b(const TruncatedSvd& t) {
    DenseMatrix b(t.sigma_k.size(), t.v_k.rows());
    for (std::size_t r = 0; r < b.rows(); ++r) {
        for (std::size_t c = 0; c < b.cols(); ++c) {
            b(r, c) = t.sigma_k[r] * t.v_k(c, r);
        }
    }
    return b;
}

void snap_factors(LowRankCorrection& corr) {
    if (!corr.factor_quant) return;
    corr.a_k = snap_matrix(corr.a_k, *corr.factor_quant);
    corr.b_k = snap_matrix(corr.b_k, *corr.factor_quant);
}

LowRankCorrection zero_correction(std::size_t m, std::size_t n, std::size_t k, Method method,
                                  const std::optional<QuantConfig>& factor_quant) {
    return LowRankCorrection{DenseMatrix(m, k), DenseMatrix(k, n), k, method, factor_quant};
}

}  // namespace

LowRankCorrection lqer_factors(const DenseMatrix& e_q, std::size_t k,
                               const std::optional<QuantConfig>& factor_quant) {
    check_rank(k, e_q.rows(), e_q.cols());
    if (frobenius_norm(e_q) == 0.0) {
        return zero_correction(e_q.rows(), e_q.cols(), k, Method::lqer, factor_quant);
    }
    const TruncatedSvd t = truncate(svd(e_q), k);
    LowRankCorrection corr{t.u_k, compose_b(t), k, Method::lqer, factor_quant};
    snap_factors(corr);
    return corr;
}

LowRankCorrection l2qer_factors(const DenseMatrix& e_q, const CalibrationProfile& profile,
                                std::size_t k, const std::optional<QuantConfig>& factor_quant) {
    if (e_q.rows() != profile.channels) {
        throw ShapeError("error matrix has " + std::to_string(e_q.rows()) +
                         " rows, profile has " + std::to_string(profile.channels) + " channels");
    }
    check_rank(k, e_q.rows(), e_q.cols());
    if (frobenius_norm(e_q) == 0.0) {
        return zero_correction(e_q.rows(), e_q.cols(), k, Method::l2qer, factor_quant);
    }
    const DenseMatrix scaled = apply_scale(e_q, profile, ScaleDirection::forward);
    const TruncatedSvd t = truncate(svd(scaled), k);
    LowRankCorrection corr{apply_scale(t.u_k, profile, ScaleDirection::inverse), compose_b(t), k,
                           Method::l2qer, factor_quant};
    snap_factors(corr);
    return corr;
}

ErrorReport approximation_error(const DenseMatrix& e_q, const LowRankCorrection& corr) {
    const DenseMatrix residual = subtract(e_q, matmul(corr.a_k, corr.b_k));
    double abs_sum = 0.0;
    for (double v : residual.values()) abs_sum += std::abs(v);
    const double e_a = abs_sum / static_cast<double>(residual.values().size());
    const double denom = std::max(frobenius_norm(e_q), 1e-30);
    return ErrorReport{e_a, frobenius_norm(residual) / denom, corr.rank};
}

SpectrumPair normalized_spectra(const DenseMatrix& e_q, const CalibrationProfile& profile) {
    const double norm_plain = frobenius_norm(e_q);
    if (norm_plain == 0.0) {
        throw ArgumentError("degenerate input: quantization error is identically zero");
    }
    const DenseMatrix scaled = apply_scale(e_q, profile, ScaleDirection::forward);

    SpectrumPair out;
    out.sigma_scaled = svd(scaled).sigma;
    out.sigma_plain = svd(e_q).sigma;
    const double alpha = frobenius_norm(scaled) / norm_plain;
    for (double& s : out.sigma_plain) s *= alpha;
    return out;
}

}  // namespace lqer
