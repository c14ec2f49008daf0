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
#include <span>
#include <vector>

#include "lqer/matrix.hpp"

namespace lqer {

enum class QuantKind : std::uint8_t {
    mxint = 0,        // block floating point: shared exponent + integer mantissas
    int_grouped = 1,  // fixed point: one real scale per group
};

enum class BlockOrientation : std::uint8_t {
    along_row = 0,  // [1, B] blocks, contiguous within a row
    along_col = 1,  // [B, 1] blocks, contiguous within a column
};

struct QuantConfig {
    QuantKind kind = QuantKind::mxint;
    int mantissa_bits = 4;               // sign + magnitude bits, 2..8
    int exponent_bits = 4;               // mxint only, 2..8
    std::size_t block_size = 16;
    BlockOrientation orientation = BlockOrientation::along_col;

    static QuantConfig mxint(int mantissa_bits, int exponent_bits, std::size_t block_size,
                             BlockOrientation orientation);
    static QuantConfig int_grouped(int mantissa_bits, std::size_t group_size,
                                   BlockOrientation orientation = BlockOrientation::along_row);

    void validate() const;  // throws ArgumentError on a bad field
    bool operator==(const QuantConfig&) const = default;
};

// Defaults used by the CLI: 4-bit exponents and [B, 1] blocks for weights and
// low-rank factors, 8-bit exponents and [1, B] blocks for activations.
QuantConfig default_weight_quant(int mantissa_bits = 4);
QuantConfig default_act_quant(int mantissa_bits = 8);
QuantConfig default_factor_quant();

// Value-level simulation of a quantized matrix: integer mantissas plus one
// shared exponent (mxint) or one real scale (int_grouped) per block. Mantissas
// are stored row-major regardless of block orientation; block metadata runs in
// block-iteration order (row blocks row by row, column blocks column by
// column). A ragged final block is quantized at its true length.
struct QuantizedMatrix {
    QuantConfig config;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::int8_t> mantissas;   // rows * cols, row-major
    std::vector<std::int8_t> exponents;   // mxint: one per block
    std::vector<double> scales;           // int_grouped: one per block

    bool operator==(const QuantizedMatrix&) const = default;
};

// Nearest integer with ties to even, independent of the FP environment.
double round_half_even(double x);

// One shared-exponent block: e = floor(log2(max |x|)) clamped to the exponent
// range, mantissa_i = round_half_even(x_i / 2^(e-(b-2))) clamped symmetric.
// An all-zero block takes the minimum exponent and zero mantissas. Saturation
// instead of overflow at both clamps.
struct MxintBlock {
    int exponent;
    std::vector<std::int8_t> mantissas;
};
MxintBlock mxint_quantize_block(std::span<const double> x, int mantissa_bits, int exponent_bits);
std::vector<double> mxint_dequantize_block(int exponent, std::span<const std::int8_t> mantissas,
                                           int mantissa_bits);

// One fixed-point group with symmetric range +-(2^(b-1)-1). The scale
// max |x| / (2^(b-1)-1) is nudged to the fixed point of s -> fl(fl(s*n)/n)
// (at most a couple of ulp) so that quantize(dequantize(.)) reproduces the
// scale bit-exactly; an all-zero group takes scale 1.
struct IntGroup {
    double scale;
    std::vector<std::int8_t> q;
};
IntGroup int_group_quantize(std::span<const double> x, int mantissa_bits);
std::vector<double> int_group_dequantize(double scale, std::span<const std::int8_t> q);

QuantizedMatrix quantize_matrix(const DenseMatrix& w, const QuantConfig& cfg);
DenseMatrix dequantize_matrix(const QuantizedMatrix& q);

// quantize + dequantize in one step: the value-snapping used everywhere a
// low-precision operand is simulated.
DenseMatrix snap_matrix(const DenseMatrix& m, const QuantConfig& cfg);

// Amortized storage bits per element of one matrix in the given format:
// b + e/B for mxint, b + 16/g for int_grouped (group scales are charged as
// 16-bit values).
double bits_per_element(const QuantConfig& cfg);

// Average stored bits per weight element for an m x n layer holding a
// low-precision matrix plus two rank-k high-precision factors:
// (m*n*p_low + (m+n)*k*p_high) / (m*n). k = 0 charges the plain format only.
double avg_bitwidth(const QuantConfig& cfg_low, std::size_t m, std::size_t n, std::size_t k,
                    const QuantConfig& cfg_high);

// Extra multiplies introduced by the rank-k correction relative to the dense
// product: (m+n)*k / (m*n).
double overhead_fraction(std::size_t m, std::size_t n, std::size_t k);

}  // namespace lqer
