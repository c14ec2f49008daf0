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

#include "lqer/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lqer/error.hpp"

namespace lqer {

namespace {

// --- little-endian byte stream -------------------------------------------

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { raw_le(v); }
    void u32(std::uint32_t v) { raw_le(v); }
    void u64(std::uint64_t v) { raw_le(v); }
    void i8(std::int8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void f64(double v) { raw_le(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { raw_le(std::bit_cast<std::uint32_t>(v)); }
    void magic(const char tag[4]) { bytes_.append(tag, 4); }

    const std::string& bytes() const { return bytes_; }

private:
    template <typename T>
    void raw_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }
    std::string bytes_;
};

class ByteReader {
public:
    ByteReader(std::string bytes, std::string origin)
        : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(raw_le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(raw_le(4)); }
    std::uint64_t u64() { return raw_le(8); }
    std::int8_t i8() { return static_cast<std::int8_t>(take(1)[0]); }
    double f64() { return std::bit_cast<double>(raw_le(8)); }
    float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(raw_le(4))); }

    void expect_magic(const char tag[4]) {
        const std::uint64_t at = pos_;
        const char* got = take(4);
        if (std::memcmp(got, tag, 4) != 0) {
            throw FormatError(origin_ + ": bad magic, expected '" + std::string(tag, 4) + "'", at);
        }
    }

    void expect_end() {
        if (pos_ != bytes_.size()) {
            throw FormatError(origin_ + ": trailing bytes after payload", pos_);
        }
    }

    std::uint64_t pos() const { return pos_; }
    const std::string& origin() const { return origin_; }

private:
    const char* take(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw FormatError(origin_ + ": truncated file, needed " + std::to_string(n) +
                              " more bytes", pos_);
        }
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint64_t raw_le(std::size_t n) {
        const char* p = take(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
        }
        return v;
    }

    std::string bytes_;
    std::string origin_;
    std::uint64_t pos_ = 0;
};

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing", 0);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("short write to '" + tmp.string() + "'", 0);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'", 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

// --- matrix container ------------------------------------------------------

constexpr char kMatrixMagic[4] = {'L', 'Q', 'M', 'X'};
constexpr std::uint16_t kMatrixVersion = 1;

void encode_matrix(ByteWriter& w, const DenseMatrix& m, MatrixDtype dtype) {
    w.magic(kMatrixMagic);
    w.u16(kMatrixVersion);
    w.u8(static_cast<std::uint8_t>(dtype));
    w.u64(m.rows());
    w.u64(m.cols());
    if (dtype == MatrixDtype::f64) {
        for (double v : m.values()) w.f64(v);
    } else {
        for (double v : m.values()) w.f32(static_cast<float>(v));
    }
}

DenseMatrix decode_matrix(ByteReader& r) {
    r.expect_magic(kMatrixMagic);
    const std::uint64_t version_at = r.pos();
    const std::uint16_t version = r.u16();
    if (version != kMatrixVersion) {
        throw FormatError(r.origin() + ": unsupported matrix version " + std::to_string(version),
                          version_at);
    }
    const std::uint64_t dtype_at = r.pos();
    const std::uint8_t dtype = r.u8();
    if (dtype > 1) {
        throw FormatError(r.origin() + ": unknown dtype code " + std::to_string(dtype), dtype_at);
    }
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24) ||
        rows * cols > (1u << 28)) {
        throw FormatError(r.origin() + ": implausible shape " + std::to_string(rows) + "x" +
                          std::to_string(cols), dtype_at + 1);
    }
    std::vector<double> values(rows * cols);
    if (static_cast<MatrixDtype>(dtype) == MatrixDtype::f64) {
        for (double& v : values) v = r.f64();
    } else {
        for (double& v : values) v = static_cast<double>(r.f32());
    }
    return DenseMatrix(rows, cols, std::move(values));
}

// --- bundle ------------------------------------------------------------------

constexpr char kBundleMagic[4] = {'L', 'Q', 'B', 'D'};
constexpr std::uint16_t kBundleVersion = 1;

void encode_config(ByteWriter& w, const QuantConfig& cfg) {
    w.u8(static_cast<std::uint8_t>(cfg.kind));
    w.u8(static_cast<std::uint8_t>(cfg.mantissa_bits));
    w.u8(static_cast<std::uint8_t>(cfg.exponent_bits));
    w.u64(cfg.block_size);
    w.u8(static_cast<std::uint8_t>(cfg.orientation));
}

QuantConfig decode_config(ByteReader& r) {
    QuantConfig cfg;
    const std::uint64_t at = r.pos();
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw FormatError(r.origin() + ": unknown quant kind", at);
    cfg.kind = static_cast<QuantKind>(kind);
    cfg.mantissa_bits = r.u8();
    cfg.exponent_bits = r.u8();
    cfg.block_size = r.u64();
    const std::uint64_t orient_at = r.pos();
    const std::uint8_t orientation = r.u8();
    if (orientation > 1) throw FormatError(r.origin() + ": unknown block orientation", orient_at);
    cfg.orientation = static_cast<BlockOrientation>(orientation);
    cfg.validate();
    return cfg;
}

void encode_quantized(ByteWriter& w, const QuantizedMatrix& q) {
    encode_config(w, q.config);
    w.u64(q.rows);
    w.u64(q.cols);
    for (std::int8_t m : q.mantissas) w.i8(m);
    if (q.config.kind == QuantKind::mxint) {
        w.u64(q.exponents.size());
        for (std::int8_t e : q.exponents) w.i8(e);
    } else {
        w.u64(q.scales.size());
        for (double s : q.scales) w.f64(s);
    }
}

QuantizedMatrix decode_quantized(ByteReader& r) {
    QuantizedMatrix q;
    q.config = decode_config(r);
    q.rows = r.u64();
    q.cols = r.u64();
    if (q.rows == 0 || q.cols == 0 || q.rows > (1u << 24) || q.cols > (1u << 24)) {
        throw FormatError(r.origin() + ": implausible quantized shape", r.pos());
    }
    q.mantissas.resize(q.rows * q.cols);
    for (std::int8_t& m : q.mantissas) m = r.i8();
    const std::uint64_t nblocks = r.u64();
    if (q.config.kind == QuantKind::mxint) {
        q.exponents.resize(nblocks);
        for (std::int8_t& e : q.exponents) e = r.i8();
    } else {
        q.scales.resize(nblocks);
        for (double& s : q.scales) s = r.f64();
    }
    return q;
}

void encode_layer(ByteWriter& w, const LqerLayer& layer) {
    encode_quantized(w, layer.w_q);
    w.u8(layer.correction ? 1 : 0);
    if (layer.correction) {
        const LowRankCorrection& corr = *layer.correction;
        w.u8(static_cast<std::uint8_t>(corr.method));
        w.u64(corr.rank);
        w.u8(corr.factor_quant ? 1 : 0);
        if (corr.factor_quant) encode_config(w, *corr.factor_quant);
        encode_matrix(w, corr.a_k, MatrixDtype::f64);
        encode_matrix(w, corr.b_k, MatrixDtype::f64);
    }
    w.u8(layer.act_quant ? 1 : 0);
    if (layer.act_quant) encode_config(w, *layer.act_quant);
}

LqerLayer decode_layer(ByteReader& r) {
    LqerLayer layer;
    layer.w_q = decode_quantized(r);
    if (r.u8()) {
        const std::uint64_t at = r.pos();
        const std::uint8_t method = r.u8();
        if (method > 2) throw FormatError(r.origin() + ": unknown correction method", at);
        const std::uint64_t rank = r.u64();
        std::optional<QuantConfig> factor_quant;
        if (r.u8()) factor_quant = decode_config(r);
        DenseMatrix a_k = decode_matrix(r);
        DenseMatrix b_k = decode_matrix(r);
        layer.correction = LowRankCorrection{std::move(a_k), std::move(b_k), rank,
                                             static_cast<Method>(method), factor_quant};
    }
    if (r.u8()) layer.act_quant = decode_config(r);
    return layer;
}

}  // namespace

void save_matrix(const std::filesystem::path& path, const DenseMatrix& m, MatrixDtype dtype) {
    ByteWriter w;
    encode_matrix(w, m, dtype);
    atomic_write(path, w.bytes());
}

DenseMatrix load_matrix(const std::filesystem::path& path) {
    ByteReader r(read_all(path), path.string());
    DenseMatrix m = decode_matrix(r);
    r.expect_end();
    return m;
}

void save_bundle(const std::filesystem::path& path, const Bundle& bundle) {
    ByteWriter w;
    w.magic(kBundleMagic);
    w.u16(kBundleVersion);
    w.u64(bundle.seed);
    w.u64(bundle.profile_hash);
    w.u32(static_cast<std::uint32_t>(bundle.layers.size()));
    for (const LqerLayer& layer : bundle.layers) encode_layer(w, layer);
    atomic_write(path, w.bytes());
}

Bundle load_bundle(const std::filesystem::path& path) {
    ByteReader r(read_all(path), path.string());
    r.expect_magic(kBundleMagic);
    const std::uint64_t version_at = r.pos();
    const std::uint16_t version = r.u16();
    if (version != kBundleVersion) {
        throw FormatError(path.string() + ": unsupported bundle version " +
                          std::to_string(version), version_at);
    }
    Bundle bundle;
    bundle.seed = r.u64();
    bundle.profile_hash = r.u64();
    const std::uint32_t count = r.u32();
    bundle.layers.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) bundle.layers.push_back(decode_layer(r));
    r.expect_end();
    return bundle;
}

void save_profile(const std::filesystem::path& path, const ProfileFile& p) {
    nlohmann::ordered_json j;
    j["channels"] = p.profile.channels;
    j["sample_count"] = p.profile.sample_count;
    j["dead_channel_policy"] = p.dead_channel_policy;
    j["a_bar"] = p.profile.a_bar;
    j["s_diag"] = p.profile.s_diag;
    atomic_write(path, j.dump(2) + "\n");
}

ProfileFile load_profile(const std::filesystem::path& path) {
    const std::string text = read_all(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what(), e.byte);
    }
    try {
        ProfileFile p;
        p.profile.channels = j.at("channels").get<std::size_t>();
        p.profile.sample_count = j.at("sample_count").get<std::size_t>();
        p.dead_channel_policy = j.at("dead_channel_policy").get<std::string>();
        p.profile.a_bar = j.at("a_bar").get<std::vector<double>>();
        p.profile.s_diag = j.at("s_diag").get<std::vector<double>>();
        if (p.profile.a_bar.size() != p.profile.channels ||
            p.profile.s_diag.size() != p.profile.channels) {
            throw FormatError(path.string() + ": channel count does not match array lengths", 0);
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what(), 0);
    }
}

std::uint64_t profile_hash(const CalibrationProfile& p) {
    constexpr std::uint64_t kOffset = 0xcbf29ce484222325ull;
    constexpr std::uint64_t kPrime = 0x100000001b3ull;
    std::uint64_t h = kOffset;
    auto mix_u64 = [&h](std::uint64_t v) {
        for (std::size_t i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= kPrime;
        }
    };
    mix_u64(p.channels);
    mix_u64(p.sample_count);
    for (double v : p.a_bar) mix_u64(std::bit_cast<std::uint64_t>(v));
    for (double v : p.s_diag) mix_u64(std::bit_cast<std::uint64_t>(v));
    return h;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace lqer
