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

#include <doctest.h>

#include <cmath>

#include "lqer/error.hpp"
#include "lqer/reconstruction.hpp"
#include "lqer/svd.hpp"
#include "test_support.hpp"

using namespace lqer;
using namespace lqer::test;

namespace {

const QuantConfig kW4 = QuantConfig::mxint(4, 4, 16, BlockOrientation::along_col);

DenseMatrix weighted(const DenseMatrix& m, const CalibrationProfile& p) {
    return apply_scale(m, p, ScaleDirection::forward);
}

}  // namespace

TEST_CASE("quant_error: representable weights give a zero error") {
    Rng rng(127);
    const DenseMatrix w = snap_matrix(random_matrix(rng, 8, 8), kW4);
    const QuantizedMatrix w_q = quantize_matrix(w, kW4);
    CHECK(frobenius_norm(quant_error(w, w_q)) == 0.0);
}

TEST_CASE("quant_error: one-element example") {
    const DenseMatrix w{{1.1}};
    const QuantizedMatrix w_q = quantize_matrix(w, kW4);
    CHECK(dequantize_matrix(w_q)(0, 0) == 1.0);
    CHECK(quant_error(w, w_q)(0, 0) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("quant_error stays within the per-block bound") {
    Rng rng(131);
    const DenseMatrix w = random_matrix(rng, 16, 4);
    const QuantizedMatrix w_q = quantize_matrix(w, kW4);
    const DenseMatrix e = quant_error(w, w_q);
    for (std::size_t c = 0; c < 4; ++c) {
        const double scale = std::ldexp(1.0, w_q.exponents[c] - 2);
        for (std::size_t r = 0; r < 16; ++r) {
            CHECK(std::abs(e(r, c)) <= 0.5 * scale + 1e-15);
        }
    }
}

TEST_CASE("quant_error rejects mismatched shapes") {
    const DenseMatrix w(4, 4);
    const QuantizedMatrix w_q = quantize_matrix(DenseMatrix(4, 5), kW4);
    CHECK_THROWS_AS(quant_error(w, w_q), ShapeError);
}

TEST_CASE("lqer_factors: zero error yields explicit zero factors") {
    const LowRankCorrection corr = lqer_factors(DenseMatrix(6, 6), 3);
    CHECK(corr.a_k == DenseMatrix(6, 3));
    CHECK(corr.b_k == DenseMatrix(3, 6));
    const ErrorReport report = approximation_error(DenseMatrix(6, 6), corr);
    CHECK(report.e_a == 0.0);
    CHECK(report.rel_frobenius == 0.0);
}

TEST_CASE("lqer_factors: rank-1 error is captured exactly at k=1") {
    Rng rng(137);
    const DenseMatrix e = matmul(random_gaussian(rng, 8, 1), random_gaussian(rng, 1, 6));
    const LowRankCorrection corr = lqer_factors(e, 1);
    CHECK(frobenius_norm(subtract(e, matmul(corr.a_k, corr.b_k))) <= 1e-10);
}

TEST_CASE("lqer_factors: residual equals the discarded spectrum") {
    Rng rng(139);
    const DenseMatrix e = random_matrix(rng, 16, 16);
    const LowRankCorrection corr = lqer_factors(e, 4);
    const SvdResult s = svd(e);
    double tail2 = 0.0;
    for (std::size_t i = 4; i < s.sigma.size(); ++i) tail2 += s.sigma[i] * s.sigma[i];
    const double expected = std::sqrt(tail2) / frobenius_norm(e);
    const ErrorReport report = approximation_error(e, corr);
    CHECK(report.rel_frobenius == doctest::Approx(expected).epsilon(1e-8));
    CHECK(report.rank == 4);
}

TEST_CASE("lqer_factors validates the rank") {
    CHECK_THROWS_AS(lqer_factors(DenseMatrix(4, 4), 0), ArgumentError);
    CHECK_THROWS_AS(lqer_factors(DenseMatrix(4, 4), 5), ArgumentError);
}

TEST_CASE("l2qer_factors: all-ones profile reconstructs like lqer") {
    Rng rng(149);
    const DenseMatrix e = random_matrix(rng, 8, 8);
    const LowRankCorrection plain = lqer_factors(e, 3);
    const LowRankCorrection scaled = l2qer_factors(e, CalibrationProfile::identity(8), 3);
    const DenseMatrix recon_plain = matmul(plain.a_k, plain.b_k);
    const DenseMatrix recon_scaled = matmul(scaled.a_k, scaled.b_k);
    CHECK(frobenius_norm(subtract(recon_plain, recon_scaled)) <=
          1e-10 * frobenius_norm(recon_plain));
}

TEST_CASE("l2qer_factors: full-rank scaled error is recovered for any scale") {
    Rng rng(151);
    const DenseMatrix e = matmul(random_gaussian(rng, 8, 2), random_gaussian(rng, 2, 8));
    std::vector<double> a_bar(8);
    for (double& v : a_bar) v = 0.5 + 4.0 * rng.uniform();
    const LowRankCorrection corr = l2qer_factors(e, scale_matrix(a_bar), 2);
    CHECK(frobenius_norm(subtract(e, matmul(corr.a_k, corr.b_k))) <=
          1e-9 * frobenius_norm(e));
}

TEST_CASE("l2qer_factors: beats lqer under the weighted norm") {
    Rng rng(157);
    const CalibrationProfile p = scale_matrix({16, 16, 16, 16, 1, 1, 1, 1});
    REQUIRE(p.s_diag[0] == 4.0);
    REQUIRE(p.s_diag[7] == 0.25);
    for (int trial = 0; trial < 10; ++trial) {
        const DenseMatrix e = random_matrix(rng, 8, 8);
        const LowRankCorrection scaled = l2qer_factors(e, p, 1);
        const LowRankCorrection plain = lqer_factors(e, 1);
        const double w_scaled =
            frobenius_norm(weighted(subtract(e, matmul(scaled.a_k, scaled.b_k)), p));
        const double w_plain =
            frobenius_norm(weighted(subtract(e, matmul(plain.a_k, plain.b_k)), p));
        CHECK(w_scaled <= w_plain + 1e-12);
    }
}

TEST_CASE("l2qer_factors: weighted residual beats random rank-k competitors") {
    Rng rng(163);
    for (int trial = 0; trial < 5; ++trial) {
        const DenseMatrix e = random_matrix(rng, 12, 12);
        std::vector<double> a_bar(12);
        for (double& v : a_bar) v = std::exp(3.0 * (rng.uniform() - 0.5));
        const CalibrationProfile p = scale_matrix(a_bar);
        const DenseMatrix e_w = weighted(e, p);
        for (std::size_t k : {1u, 3u}) {
            const LowRankCorrection corr = l2qer_factors(e, p, k);
            const double best =
                frobenius_norm(weighted(subtract(e, matmul(corr.a_k, corr.b_k)), p));
            for (int comp = 0; comp < 20; ++comp) {
                const DenseMatrix q = random_orthonormal(rng, 12, k);
                const double other = frobenius_norm(subtract(e_w, rank_k_competitor(q, e_w)));
                CHECK(best <= other + 1e-12);
            }
        }
    }
}

TEST_CASE("lqer_factors: plain residual beats random rank-k competitors") {
    Rng rng(167);
    for (int trial = 0; trial < 5; ++trial) {
        const DenseMatrix e = random_matrix(rng, 12, 12);
        for (std::size_t k : {1u, 3u}) {
            const LowRankCorrection corr = lqer_factors(e, k);
            const double best = frobenius_norm(subtract(e, matmul(corr.a_k, corr.b_k)));
            for (int comp = 0; comp < 20; ++comp) {
                const DenseMatrix q = random_orthonormal(rng, 12, k);
                const double other = frobenius_norm(subtract(e, rank_k_competitor(q, e)));
                CHECK(best <= other + 1e-12);
            }
        }
    }
}

TEST_CASE("l2qer_factors validates dimensions") {
    const DenseMatrix e(4, 4);
    CHECK_THROWS_AS(l2qer_factors(e, CalibrationProfile::identity(5), 2), ShapeError);
}

TEST_CASE("factor quantization snaps both factors") {
    Rng rng(173);
    const DenseMatrix w = random_matrix(rng, 16, 16);
    const DenseMatrix e = quant_error(w, quantize_matrix(w, kW4));
    const QuantConfig fq = default_factor_quant();
    const LowRankCorrection corr = lqer_factors(e, 4, fq);
    CHECK(corr.factor_quant == fq);
    CHECK(snap_matrix(corr.a_k, fq) == corr.a_k);
    CHECK(snap_matrix(corr.b_k, fq) == corr.b_k);
}

TEST_CASE("rel_frobenius is non-increasing in k") {
    Rng rng(179);
    const DenseMatrix e = random_matrix(rng, 10, 10);
    double prev = 2.0;
    for (std::size_t k = 1; k <= 10; ++k) {
        const double rel = approximation_error(e, lqer_factors(e, k)).rel_frobenius;
        CHECK(rel <= prev + 1e-12);
        prev = rel;
    }
}

TEST_CASE("approximation_error: exact reconstruction reports zero") {
    Rng rng(181);
    const DenseMatrix e = matmul(random_gaussian(rng, 6, 2), random_gaussian(rng, 2, 6));
    const ErrorReport report = approximation_error(e, lqer_factors(e, 2));
    CHECK(report.e_a <= 1e-12);
    CHECK(report.rel_frobenius <= 1e-12);
}

TEST_CASE("approximation_error: constant-magnitude residual") {
    const DenseMatrix e{{1, -1}, {1, -1}};
    const LowRankCorrection zero{DenseMatrix(2, 1), DenseMatrix(1, 2), 1, Method::lqer, {}};
    CHECK(approximation_error(e, zero).e_a == 1.0);
}

TEST_CASE("approximation_error matches a two-loop oracle") {
    Rng rng(191);
    const DenseMatrix e = random_matrix(rng, 10, 10);
    const LowRankCorrection corr = lqer_factors(e, 3);
    const DenseMatrix recon = matmul(corr.a_k, corr.b_k);
    double abs_sum = 0.0;
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 10; ++c) abs_sum += std::abs(e(r, c) - recon(r, c));
    const double oracle = abs_sum / 100.0;
    CHECK(approximation_error(e, corr).e_a == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("normalized_spectra: identity profile gives identical vectors") {
    Rng rng(193);
    const DenseMatrix e = random_matrix(rng, 6, 6);
    const SpectrumPair pair = normalized_spectra(e, CalibrationProfile::identity(6));
    REQUIRE(pair.sigma_plain.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(pair.sigma_plain[i] ==
              doctest::Approx(pair.sigma_scaled[i]).epsilon(1e-10));
    }
}

TEST_CASE("normalized_spectra: both spectra carry the same energy") {
    Rng rng(197);
    const DenseMatrix e = random_matrix(rng, 8, 5);
    std::vector<double> a_bar(8);
    for (double& v : a_bar) v = std::exp(2.0 * (rng.uniform() - 0.5));
    const SpectrumPair pair = normalized_spectra(e, scale_matrix(a_bar));
    double plain2 = 0.0, scaled2 = 0.0;
    for (double s : pair.sigma_plain) plain2 += s * s;
    for (double s : pair.sigma_scaled) scaled2 += s * s;
    CHECK(plain2 == doctest::Approx(scaled2).epsilon(1e-10));
}

TEST_CASE("normalized_spectra: outlier scaling concentrates the spectrum") {
    // one dominant channel against a flat background
    std::vector<double> a_bar(8, 0.1);
    a_bar[0] = 10.0;
    const CalibrationProfile p = scale_matrix(a_bar);
    int wins = 0;
    for (int seed = 0; seed < 50; ++seed) {
        Rng rng(1000 + seed);
        const DenseMatrix e = random_matrix(rng, 8, 8);
        const SpectrumPair pair = normalized_spectra(e, p);
        double plain2 = 0.0, scaled2 = 0.0;
        for (double s : pair.sigma_plain) plain2 += s * s;
        for (double s : pair.sigma_scaled) scaled2 += s * s;
        const double top_plain = pair.sigma_plain[0] * pair.sigma_plain[0] / plain2;
        const double top_scaled = pair.sigma_scaled[0] * pair.sigma_scaled[0] / scaled2;
        if (top_scaled > top_plain) ++wins;
    }
    CHECK(wins >= 45);  // >= 90% of seeds
}

TEST_CASE("normalized_spectra rejects a zero error matrix") {
    CHECK_THROWS_AS(normalized_spectra(DenseMatrix(4, 4), CalibrationProfile::identity(4)),
                    ArgumentError);
}
