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

#include "lqer/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqer/error.hpp"

namespace lqer {

CalibrationProfile CalibrationProfile::identity(std::size_t channels) {
    CalibrationProfile p;
    p.channels = channels;
    p.a_bar.assign(channels, 1.0);
    p.s_diag.assign(channels, 1.0);
    return p;
}

namespace {

// Per-sample mean absolute magnitude of each channel, tokens summed in
// ascending order so the streaming and batch forms agree bit for bit.
std::vector<double> mean_abs_per_channel(const DenseMatrix& sample) {
    std::vector<double> mean(sample.cols(), 0.0);
    for (std::size_t t = 0; t < sample.rows(); ++t) {
        for (std::size_t c = 0; c < sample.cols(); ++c) {
            mean[c] += std::abs(sample(t, c));
        }
    }
    const double tokens = static_cast<double>(sample.rows());
    for (double& v : mean) v /= tokens;
    return mean;
}

}  // namespace

std::vector<double> profile_channels(const std::vector<DenseMatrix>& samples) {
    if (samples.empty()) {
        throw ArgumentError("profile_channels requires at least one sample");
    }
    ChannelAccumulator acc(samples.front().cols());
    for (const DenseMatrix& s : samples) acc.update(s);
    return acc.finalize();
}

ChannelAccumulator::ChannelAccumulator(std::size_t channels) : max_mean_(channels, 0.0) {
    if (channels == 0) {
        throw ArgumentError("accumulator needs at least one channel");
    }
}

void ChannelAccumulator::update(const DenseMatrix& sample) {
    if (sample.cols() != max_mean_.size()) {
        throw ShapeError("sample has " + std::to_string(sample.cols()) +
                         " channels, expected " + std::to_string(max_mean_.size()));
    }
    const std::vector<double> mean = mean_abs_per_channel(sample);
    for (std::size_t c = 0; c < mean.size(); ++c) {
        max_mean_[c] = std::max(max_mean_[c], mean[c]);
    }
    ++samples_;
}

void ChannelAccumulator::merge(const ChannelAccumulator& other) {
    if (other.max_mean_.size() != max_mean_.size()) {
        throw ShapeError("cannot merge accumulators with different channel counts");
    }
    for (std::size_t c = 0; c < max_mean_.size(); ++c) {
        max_mean_[c] = std::max(max_mean_[c], other.max_mean_[c]);
    }
    samples_ += other.samples_;
}

std::vector<double> ChannelAccumulator::finalize() const {
    if (samples_ == 0) {
        throw ArgumentError("no samples accumulated");
    }
    return max_mean_;
}

CalibrationProfile scale_matrix(std::vector<double> a_bar, std::size_t sample_count) {
    if (a_bar.empty()) {
        throw ArgumentError("scale_matrix requires at least one channel");
    }
    for (std::size_t c = 0; c < a_bar.size(); ++c) {
        if (!(a_bar[c] > 0.0)) {
            throw CalibrationError("dead channel: activation magnitude is not positive", c);
        }
    }
    const auto [lo, hi] = std::minmax_element(a_bar.begin(), a_bar.end());
    const double denom = std::sqrt(*lo * *hi);

    CalibrationProfile p;
    p.channels = a_bar.size();
    p.sample_count = sample_count;
    p.s_diag.resize(a_bar.size());
    for (std::size_t c = 0; c < a_bar.size(); ++c) p.s_diag[c] = a_bar[c] / denom;
    p.a_bar = std::move(a_bar);
    return p;
}

std::vector<double> floor_dead_channels(std::vector<double> a_bar, double rel_floor) {
    const double max = *std::max_element(a_bar.begin(), a_bar.end());
    if (!(max > 0.0)) {
        throw CalibrationError("all channels are dead, nothing to floor against", 0);
    }
    for (double& v : a_bar) {
        if (!(v > 0.0)) v = rel_floor * max;
    }
    return a_bar;
}

DenseMatrix apply_scale(const DenseMatrix& e, const CalibrationProfile& profile,
                        ScaleDirection direction) {
    if (e.rows() != profile.channels) {
        throw ShapeError("matrix has " + std::to_string(e.rows()) + " rows, profile has " +
                         std::to_string(profile.channels) + " channels");
    }
    DenseMatrix out = e;
    for (std::size_t r = 0; r < e.rows(); ++r) {
        const double s = profile.s_diag[r];
        if (direction == ScaleDirection::forward) {
            for (std::size_t c = 0; c < e.cols(); ++c) out(r, c) *= s;
        } else {
            for (std::size_t c = 0; c < e.cols(); ++c) out(r, c) /= s;
        }
    }
    return out;
}

}  // namespace lqer
