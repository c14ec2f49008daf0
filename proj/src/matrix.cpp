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

#include "lqer/matrix.hpp"

#include <cmath>
#include <string>

#include "lqer/error.hpp"

namespace lqer {

namespace {

void check_shape(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw ArgumentError("matrix shape must be at least 1x1, got " + std::to_string(rows) +
                            "x" + std::to_string(cols));
    }
}

void check_finite(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw ArgumentError("matrix entry " + std::to_string(i) + " is not finite");
        }
    }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    check_shape(rows, cols);
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    check_shape(rows, cols);
    if (data_.size() != rows * cols) {
        throw ArgumentError("matrix data length " + std::to_string(data_.size()) +
                            " does not match shape " + std::to_string(rows) + "x" +
                            std::to_string(cols));
    }
    check_finite(data_);
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    check_shape(rows_, cols_);
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) {
            throw ArgumentError("ragged initializer: expected " + std::to_string(cols_) +
                                " columns per row");
        }
        data_.insert(data_.end(), row.begin(), row.end());
    }
    check_finite(data_);
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " times " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
    DenseMatrix c(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = c.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double aval = pa[i * k + l];
            if (aval == 0.0) continue;
            const double* brow = pb + l * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
        }
    }
    return c;
}

double frobenius_norm(const DenseMatrix& m) {
    double sum = 0.0;
    for (double v : m.values()) sum += v * v;
    return std::sqrt(sum);
}

DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

namespace {

void check_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + " shape mismatch: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

}  // namespace

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    check_same_shape(a, b, "add");
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.values().size(); ++i) c.values()[i] += b.values()[i];
    return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
    check_same_shape(a, b, "subtract");
    DenseMatrix c = a;
    for (std::size_t i = 0; i < c.values().size(); ++i) c.values()[i] -= b.values()[i];
    return c;
}

DenseMatrix scale(const DenseMatrix& m, double factor) {
    DenseMatrix c = m;
    for (double& v : c.values()) v *= factor;
    return c;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
    }
    return worst;
}

}  // namespace lqer
