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

// Per-channel activation statistics and the diagonal scale derived from them.
// a_bar[i] is the maximum over calibration samples of the per-sample mean
// absolute magnitude of channel i; s_diag[i] = a_bar[i] / sqrt(min * max of
// a_bar), which pins min(s) * max(s) to 1 and makes the scale invariant under
// uniform rescaling of the activations.
struct CalibrationProfile {
    std::size_t channels = 0;
    std::vector<double> a_bar;
    std::size_t sample_count = 0;
    std::vector<double> s_diag;

    static CalibrationProfile identity(std::size_t channels);

    bool operator==(const CalibrationProfile&) const = default;
};

// a_bar from a batch of samples, each tokens x channels with a shared channel
// count. Tokens may differ per sample; each sample is averaged before the
// cross-sample max, so no global token weighting applies.
std::vector<double> profile_channels(const std::vector<DenseMatrix>& samples);

// Streaming form of profile_channels. Results are bit-identical to the batch
// form; merged accumulators equal sequential accumulation exactly (the
// combine is an element-wise max).
class ChannelAccumulator {
public:
    explicit ChannelAccumulator(std::size_t channels);
    void update(const DenseMatrix& sample);
    void merge(const ChannelAccumulator& other);
    std::vector<double> finalize() const;  // throws if no samples were seen
    std::size_t sample_count() const noexcept { return samples_; }
    std::size_t channels() const noexcept { return max_mean_.size(); }

private:
    std::vector<double> max_mean_;
    std::size_t samples_ = 0;
};

// Builds the profile from a_bar. A non-positive channel is a hard error: the
// scaling assumes every channel carries signal, and silently flooring a dead
// one would mask that. Use floor_dead_channels first for exploratory runs.
CalibrationProfile scale_matrix(std::vector<double> a_bar, std::size_t sample_count = 0);

// Replaces non-positive entries with rel_floor * max(a_bar). Throws if every
// channel is dead.
std::vector<double> floor_dead_channels(std::vector<double> a_bar, double rel_floor = 1e-8);

enum class ScaleDirection { forward, inverse };

// Multiplies (forward) or divides (inverse) row i by s_diag[i]; forward then
// inverse restores the input to within roundoff.
DenseMatrix apply_scale(const DenseMatrix& e, const CalibrationProfile& profile,
                        ScaleDirection direction);

}  // namespace lqer
