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

#include "lqer/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqer/error.hpp"

namespace lqer {

QuantConfig QuantConfig::mxint(int mantissa_bits, int exponent_bits, std::size_t block_size,
                               BlockOrientation orientation) {
    QuantConfig cfg{QuantKind::mxint, mantissa_bits, exponent_bits, block_size, orientation};
    cfg.validate();
    return cfg;
}

QuantConfig QuantConfig::int_grouped(int mantissa_bits, std::size_t group_size,
                                     BlockOrientation orientation) {
    QuantConfig cfg{QuantKind::int_grouped, mantissa_bits, 0, group_size, orientation};
    cfg.validate();
    return cfg;
}

void QuantConfig::validate() const {
    if (mantissa_bits < 2 || mantissa_bits > 8) {
        throw ArgumentError("mantissa bits must be in [2, 8], got " +
                            std::to_string(mantissa_bits));
    }
    if (kind == QuantKind::mxint && (exponent_bits < 2 || exponent_bits > 8)) {
        throw ArgumentError("exponent bits must be in [2, 8], got " +
                            std::to_string(exponent_bits));
    }
    if (block_size < 1) {
        throw ArgumentError("block size must be at least 1");
    }
}

QuantConfig default_weight_quant(int mantissa_bits) {
    return QuantConfig::mxint(mantissa_bits, 4, 16, BlockOrientation::along_col);
}

QuantConfig default_act_quant(int mantissa_bits) {
    return QuantConfig::mxint(mantissa_bits, 8, 16, BlockOrientation::along_row);
}

QuantConfig default_factor_quant() {
    return QuantConfig::mxint(8, 4, 16, BlockOrientation::along_col);
}

double round_half_even(double x) {
    const double f = std::floor(x);
    const double d = x - f;
    if (d < 0.5) return f;
    if (d > 0.5) return f + 1.0;
    return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

MxintBlock mxint_quantize_block(std::span<const double> x, int mantissa_bits, int exponent_bits) {
    const int e_min = -(1 << (exponent_bits - 1));
    const int e_max = (1 << (exponent_bits - 1)) - 1;
    const double q_max = static_cast<double>((1 << (mantissa_bits - 1)) - 1);

    double max_abs = 0.0;
    for (double v : x) max_abs = std::max(max_abs, std::abs(v));

    MxintBlock block;
    block.mantissas.resize(x.size(), 0);
    if (max_abs == 0.0) {
        block.exponent = e_min;
        return block;
    }

    block.exponent = std::clamp(std::ilogb(max_abs), e_min, e_max);
    const double inv_scale = std::ldexp(1.0, -(block.exponent - (mantissa_bits - 2)));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = round_half_even(x[i] * inv_scale);
        block.mantissas[i] = static_cast<std::int8_t>(std::clamp(r, -q_max, q_max));
    }
    return block;
}

std::vector<double> mxint_dequantize_block(int exponent, std::span<const std::int8_t> mantissas,
                                           int mantissa_bits) {
    const double scale = std::ldexp(1.0, exponent - (mantissa_bits - 2));
    std::vector<double> out(mantissas.size());
    for (std::size_t i = 0; i < mantissas.size(); ++i) {
        out[i] = static_cast<double>(mantissas[i]) * scale;
    }
    return out;
}

namespace {

// Fixed point of s -> fl(fl(s * n) / n). The map is monotone and within a few
// ulp of the identity, so the loop terminates almost immediately; with a
// fixed-point scale, re-deriving the scale from dequantized values is exact.
double stabilize_scale(double s, double levels) {
    for (int i = 0; i < 8; ++i) {
        const double t = (s * levels) / levels;
        if (t == s) break;
        s = t;
    }
    return s;
}

}  // namespace

IntGroup int_group_quantize(std::span<const double> x, int mantissa_bits) {
    const double levels = static_cast<double>((1 << (mantissa_bits - 1)) - 1);

    double max_abs = 0.0;
    for (double v : x) max_abs = std::max(max_abs, std::abs(v));

    IntGroup group;
    group.q.resize(x.size(), 0);
    if (max_abs == 0.0) {
        group.scale = 1.0;
        return group;
    }

    group.scale = stabilize_scale(max_abs / levels, levels);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = round_half_even(x[i] / group.scale);
        group.q[i] = static_cast<std::int8_t>(std::clamp(r, -levels, levels));
    }
    return group;
}

std::vector<double> int_group_dequantize(double scale, std::span<const std::int8_t> q) {
    std::vector<double> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = static_cast<double>(q[i]) * scale;
    return out;
}

namespace {

struct BlockRef {
    std::size_t offset;  // row-major element index of the first entry
    std::size_t count;
    std::size_t stride;
};

// Visits blocks in a fixed order: along_row walks each row left to right,
// along_col walks each column top to bottom.
template <typename Fn>
void for_each_block(std::size_t rows, std::size_t cols, const QuantConfig& cfg, Fn&& fn) {
    const std::size_t b = cfg.block_size;
    if (cfg.orientation == BlockOrientation::along_row) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c0 = 0; c0 < cols; c0 += b) {
                fn(BlockRef{r * cols + c0, std::min(b, cols - c0), 1});
            }
        }
    } else {
        for (std::size_t c = 0; c < cols; ++c) {
            for (std::size_t r0 = 0; r0 < rows; r0 += b) {
                fn(BlockRef{r0 * cols + c, std::min(b, rows - r0), cols});
            }
        }
    }
}

std::size_t block_count(std::size_t rows, std::size_t cols, const QuantConfig& cfg) {
    const std::size_t b = cfg.block_size;
    if (cfg.orientation == BlockOrientation::along_row) {
        return rows * ((cols + b - 1) / b);
    }
    return cols * ((rows + b - 1) / b);
}

}  // namespace

QuantizedMatrix quantize_matrix(const DenseMatrix& w, const QuantConfig& cfg) {
    cfg.validate();

    QuantizedMatrix q;
    q.config = cfg;
    q.rows = w.rows();
    q.cols = w.cols();
    q.mantissas.resize(w.rows() * w.cols());
    const std::size_t nblocks = block_count(w.rows(), w.cols(), cfg);
    if (cfg.kind == QuantKind::mxint) {
        q.exponents.reserve(nblocks);
    } else {
        q.scales.reserve(nblocks);
    }

    std::vector<double> gathered;
    for_each_block(w.rows(), w.cols(), cfg, [&](const BlockRef& ref) {
        gathered.resize(ref.count);
        for (std::size_t i = 0; i < ref.count; ++i) {
            gathered[i] = w.values()[ref.offset + i * ref.stride];
        }
        if (cfg.kind == QuantKind::mxint) {
            MxintBlock block = mxint_quantize_block(gathered, cfg.mantissa_bits, cfg.exponent_bits);
            q.exponents.push_back(static_cast<std::int8_t>(block.exponent));
            for (std::size_t i = 0; i < ref.count; ++i) {
                q.mantissas[ref.offset + i * ref.stride] = block.mantissas[i];
            }
        } else {
            IntGroup group = int_group_quantize(gathered, cfg.mantissa_bits);
            q.scales.push_back(group.scale);
            for (std::size_t i = 0; i < ref.count; ++i) {
                q.mantissas[ref.offset + i * ref.stride] = group.q[i];
            }
        }
    });
    return q;
}

DenseMatrix dequantize_matrix(const QuantizedMatrix& q) {
    DenseMatrix out(q.rows, q.cols);
    std::size_t block_idx = 0;
    std::vector<std::int8_t> gathered;
    for_each_block(q.rows, q.cols, q.config, [&](const BlockRef& ref) {
        gathered.resize(ref.count);
        for (std::size_t i = 0; i < ref.count; ++i) {
            gathered[i] = q.mantissas[ref.offset + i * ref.stride];
        }
        std::vector<double> values;
        if (q.config.kind == QuantKind::mxint) {
            values = mxint_dequantize_block(q.exponents[block_idx], gathered,
                                            q.config.mantissa_bits);
        } else {
            values = int_group_dequantize(q.scales[block_idx], gathered);
        }
        for (std::size_t i = 0; i < ref.count; ++i) {
            out.values()[ref.offset + i * ref.stride] = values[i];
        }
        ++block_idx;
    });
    return out;
}

DenseMatrix snap_matrix(const DenseMatrix& m, const QuantConfig& cfg) {
    return dequantize_matrix(quantize_matrix(m, cfg));
}

double bits_per_element(const QuantConfig& cfg) {
    const double b = static_cast<double>(cfg.mantissa_bits);
    const double block = static_cast<double>(cfg.block_size);
    if (cfg.kind == QuantKind::mxint) {
        return b + static_cast<double>(cfg.exponent_bits) / block;
    }
    return b + 16.0 / block;
}

double avg_bitwidth(const QuantConfig& cfg_low, std::size_t m, std::size_t n, std::size_t k,
                    const QuantConfig& cfg_high) {
    const double dense = static_cast<double>(m) * static_cast<double>(n);
    if (k == 0) return bits_per_element(cfg_low);
    const double factors = static_cast<double>(m + n) * static_cast<double>(k);
    return bits_per_element(cfg_low) + factors * bits_per_element(cfg_high) / dense;
}

double overhead_fraction(std::size_t m, std::size_t n, std::size_t k) {
    if (m < 1 || n < 1 || k < 1) {
        throw ArgumentError("overhead_fraction requires m, n, k >= 1");
    }
    return static_cast<double>(m + n) * static_cast<double>(k) /
           (static_cast<double>(m) * static_cast<double>(n));
}

}  // namespace lqer
