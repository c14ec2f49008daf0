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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lqer/calibration.hpp"
#include "lqer/layer.hpp"
#include "lqer/matrix.hpp"

namespace lqer {

// Binary matrix container ("LQMX"): magic, u16 version, u8 dtype (0 = f32,
// 1 = f64), u64 rows, u64 cols, then the row-major payload. All integers and
// payload values are little-endian; f64 round trips are value-exact. Writes
// go through a temp file and rename, so a failed write leaves no partial
// output.
enum class MatrixDtype : std::uint8_t { f32 = 0, f64 = 1 };

void save_matrix(const std::filesystem::path& path, const DenseMatrix& m,
                 MatrixDtype dtype = MatrixDtype::f64);
DenseMatrix load_matrix(const std::filesystem::path& path);

// Versioned archive ("LQBD") of reconstructed layers plus provenance: the
// seed the inputs were generated from and a hash of the calibration profile
// (0 when none was used). reference_w is diagnostic-only and not serialized;
// loaded layers reproduce forward outputs bit-exactly.
struct Bundle {
    std::vector<LqerLayer> layers;
    std::uint64_t seed = 0;
    std::uint64_t profile_hash = 0;
};

void save_bundle(const std::filesystem::path& path, const Bundle& bundle);
Bundle load_bundle(const std::filesystem::path& path);

// Calibration profiles persist as JSON so they stay human-readable; numbers
// are serialized with shortest round-trip precision, so load(save(p)) == p.
struct ProfileFile {
    CalibrationProfile profile;
    std::string dead_channel_policy = "error";  // "error" or "floored"
};

void save_profile(const std::filesystem::path& path, const ProfileFile& p);
ProfileFile load_profile(const std::filesystem::path& path);

// FNV-1a over the profile's canonical little-endian byte image.
std::uint64_t profile_hash(const CalibrationProfile& p);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace lqer
