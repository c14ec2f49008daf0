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
#include <vector>

#include "lqer/matrix.hpp"

namespace lqer {

// Full singular value decomposition M = U * diag(sigma) * V^T with square
// orthogonal U (m x m) and V (n x n); sigma holds min(m, n) values sorted
// non-increasing.
struct SvdResult {
    DenseMatrix u;
    std::vector<double> sigma;
    DenseMatrix v;
};

// Leading-k slice of an SvdResult: u_k is m x k, v_k is n x k.
struct TruncatedSvd {
    DenseMatrix u_k;
    std::vector<double> sigma_k;
    DenseMatrix v_k;
};

// One-sided Jacobi SVD with cyclic sweeps. Deterministic: a fixed pair order
// and convergence schedule make repeated calls on the same input bitwise
// identical. Sign convention: the largest-magnitude entry of every left
// singular vector is non-negative. Throws NumericalError if the sweep cap is
// exhausted before all column pairs are orthogonal to 1e-12 relative.
SvdResult svd(const DenseMatrix& m);

// First k singular triplets; requires 1 <= k <= sigma.size().
TruncatedSvd truncate(const SvdResult& s, std::size_t k);

// U * diag(sigma) * V^T, rectangular-diagonal in the full case.
DenseMatrix reconstruct(const SvdResult& s);
DenseMatrix reconstruct(const TruncatedSvd& t);

}  // namespace lqer
