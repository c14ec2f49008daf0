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

#include "lqer/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lqer/error.hpp"

namespace lqer {

namespace {

constexpr double kRotationTol = 1e-12;  // relative off-diagonal threshold
constexpr int kMaxSweeps = 60;

// Column-major working storage for the rotated matrix and the accumulated
// right singular vectors.
struct ColMajor {
    std::size_t rows = 0;
    std::vector<double> data;  // data[c * rows + r]

    ColMajor(std::size_t r, std::size_t c) : rows(r), data(r * c, 0.0) {}
    double* col(std::size_t c) { return data.data() + c * rows; }
    const double* col(std::size_t c) const { return data.data() + c * rows; }
};

void rotate_columns(double* x, double* y, std::size_t n, double c, double s) {
    for (std::size_t r = 0; r < n; ++r) {
        const double xr = x[r];
        const double yr = y[r];
        x[r] = c * xr - s * yr;
        y[r] = s * xr + c * yr;
    }
}

// Orthogonalizes the rotated column set of a tall matrix (rows >= cols) and
// returns sigma (one value per column, unsorted), the normalized columns in
// `work`, and the accumulated rotations in `v`.
int jacobi_sweeps(ColMajor& work, ColMajor& v, std::size_t cols) {
    const std::size_t rows = work.rows;
    for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
        bool converged = true;
        for (std::size_t i = 0; i + 1 < cols; ++i) {
            for (std::size_t j = i + 1; j < cols; ++j) {
                const double* ci = work.col(i);
                const double* cj = work.col(j);
                double aii = 0.0, ajj = 0.0, aij = 0.0;
                for (std::size_t r = 0; r < rows; ++r) {
                    aii += ci[r] * ci[r];
                    ajj += cj[r] * cj[r];
                    aij += ci[r] * cj[r];
                }
                if (std::abs(aij) <= kRotationTol * (std::sqrt(aii) * std::sqrt(ajj))) continue;
                converged = false;

                const double tau = (ajj - aii) / (2.0 * aij);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_columns(work.col(i), work.col(j), rows, c, s);
                rotate_columns(v.col(i), v.col(j), v.rows, c, s);
            }
        }
        if (converged) return sweep;
    }
    throw NumericalError("one-sided Jacobi SVD did not converge",
                         static_cast<std::size_t>(kMaxSweeps));
}

// Extends the orthonormal columns already stored in u (flags in `filled`) to
// a complete basis. Candidates are standard basis vectors; each empty slot
// takes the candidate with the largest residual after projection, which keeps
// the choice deterministic and well-conditioned.
void complete_basis(ColMajor& u, std::vector<bool>& filled) {
    const std::size_t n = u.rows;
    const std::size_t slots = filled.size();

    // residual^2 of each candidate e_t against the filled columns
    std::vector<double> res2(n, 1.0);
    for (std::size_t c = 0; c < slots; ++c) {
        if (!filled[c]) continue;
        const double* uc = u.col(c);
        for (std::size_t t = 0; t < n; ++t) res2[t] -= uc[t] * uc[t];
    }

    std::vector<double> cand(n);
    for (std::size_t slot = 0; slot < slots; ++slot) {
        if (filled[slot]) continue;
        std::size_t best = 0;
        for (std::size_t t = 1; t < n; ++t) {
            if (res2[t] > res2[best]) best = t;
        }
        std::fill(cand.begin(), cand.end(), 0.0);
        cand[best] = 1.0;
        // two Gram-Schmidt passes keep orthogonality near machine precision
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t c = 0; c < slots; ++c) {
                if (!filled[c]) continue;
                const double* uc = u.col(c);
                double dot = 0.0;
                for (std::size_t t = 0; t < n; ++t) dot += uc[t] * cand[t];
                for (std::size_t t = 0; t < n; ++t) cand[t] -= dot * uc[t];
            }
        }
        double norm = 0.0;
        for (double vv : cand) norm += vv * vv;
        norm = std::sqrt(norm);
        double* slot_col = u.col(slot);
        for (std::size_t t = 0; t < n; ++t) slot_col[t] = cand[t] / norm;
        filled[slot] = true;
        for (std::size_t t = 0; t < n; ++t) res2[t] -= slot_col[t] * slot_col[t];
        res2[best] = -1.0;  // candidate consumed
    }
}

// Core decomposition for rows >= cols.
void svd_tall(const DenseMatrix& m, ColMajor& u_out, std::vector<double>& sigma_out,
              ColMajor& v_out) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();

    ColMajor work(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) work.col(c)[r] = m(r, c);

    ColMajor v(cols, cols);
    for (std::size_t c = 0; c < cols; ++c) v.col(c)[c] = 1.0;

    jacobi_sweeps(work, v, cols);

    std::vector<double> norms(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        double sum = 0.0;
        const double* pc = work.col(c);
        for (std::size_t r = 0; r < rows; ++r) sum += pc[r] * pc[r];
        norms[c] = std::sqrt(sum);
    }

    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    sigma_out.resize(cols);
    u_out = ColMajor(rows, rows);
    v_out = ColMajor(cols, cols);
    std::vector<bool> filled(rows, false);
    for (std::size_t idx = 0; idx < cols; ++idx) {
        const std::size_t src = order[idx];
        sigma_out[idx] = norms[src];
        const double* vc = v.col(src);
        std::copy(vc, vc + cols, v_out.col(idx));
        if (norms[src] > 0.0) {
            const double* wc = work.col(src);
            double* uc = u_out.col(idx);
            for (std::size_t r = 0; r < rows; ++r) uc[r] = wc[r] / norms[src];
            filled[idx] = true;
        }
    }
    complete_basis(u_out, filled);
}

DenseMatrix to_dense(const ColMajor& cm, std::size_t cols) {
    DenseMatrix m(cm.rows, cols);
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < cm.rows; ++r) m(r, c) = cm.col(c)[r];
    return m;
}

// Flips columns so the largest-magnitude entry of each left singular vector
// is non-negative; paired right vectors flip with them.
void fix_signs(DenseMatrix& u, DenseMatrix& v, std::size_t paired) {
    for (std::size_t c = 0; c < u.cols(); ++c) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t r = 0; r < u.rows(); ++r) {
            const double mag = std::abs(u(r, c));
            if (mag > best) {
                best = mag;
                arg = r;
            }
        }
        if (u(arg, c) >= 0.0) continue;
        for (std::size_t r = 0; r < u.rows(); ++r) u(r, c) = -u(r, c);
        if (c < paired) {
            for (std::size_t r = 0; r < v.rows(); ++r) v(r, c) = -v(r, c);
        }
    }
}

}  // namespace

SvdResult svd(const DenseMatrix& m) {
    const bool wide = m.cols() > m.rows();

    ColMajor u_cm(1, 1), v_cm(1, 1);
    std::vector<double> sigma;
    if (wide) {
        const DenseMatrix mt = transpose(m);
        svd_tall(mt, u_cm, sigma, v_cm);
    } else {
        svd_tall(m, u_cm, sigma, v_cm);
    }

    const std::size_t tall_rows = wide ? m.cols() : m.rows();
    const std::size_t tall_cols = wide ? m.rows() : m.cols();
    DenseMatrix u_tall = to_dense(u_cm, tall_rows);
    DenseMatrix v_tall = to_dense(v_cm, tall_cols);

    // M = U S V^T implies M^T = V S U^T, so a wide input swaps the factors.
    if (wide) std::swap(u_tall, v_tall);
    fix_signs(u_tall, v_tall, sigma.size());
    return SvdResult{std::move(u_tall), std::move(sigma), std::move(v_tall)};
}

TruncatedSvd truncate(const SvdResult& s, std::size_t k) {
    if (k < 1 || k > s.sigma.size()) {
        throw ArgumentError("truncation rank " + std::to_string(k) + " out of range [1, " +
                            std::to_string(s.sigma.size()) + "]");
    }
    DenseMatrix u_k(s.u.rows(), k);
    DenseMatrix v_k(s.v.rows(), k);
    for (std::size_t r = 0; r < s.u.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c) u_k(r, c) = s.u(r, c);
    for (std::size_t r = 0; r < s.v.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c) v_k(r, c) = s.v(r, c);
    return TruncatedSvd{std::move(u_k),
                        std::vector<double>(s.sigma.begin(), s.sigma.begin() + k),
                        std::move(v_k)};
}

namespace {

DenseMatrix scaled_product(const DenseMatrix& u, const std::vector<double>& sigma,
                           const DenseMatrix& v) {
    DenseMatrix out(u.rows(), v.rows());
    for (std::size_t i = 0; i < u.rows(); ++i) {
        for (std::size_t j = 0; j < v.rows(); ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k < sigma.size(); ++k) sum += u(i, k) * sigma[k] * v(j, k);
            out(i, j) = sum;
        }
    }
    return out;
}

}  // namespace

DenseMatrix reconstruct(const SvdResult& s) { return scaled_product(s.u, s.sigma, s.v); }

DenseMatrix reconstruct(const TruncatedSvd& t) { return scaled_product(t.u_k, t.sigma_k, t.v_k); }

}  // namespace lqer
