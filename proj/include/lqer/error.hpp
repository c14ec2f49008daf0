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
#include <stdexcept>
#include <string>

namespace lqer {

// Error taxonomy shared by the library and CLI. exit_code() is the process
// exit status the CLI maps each class to: 2 argument, 3 format, 4 numerical,
// 5 calibration.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

// Bad call arguments: out-of-range rank, empty sample list, invalid config.
class ArgumentError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// Incompatible matrix / vector dimensions.
class ShapeError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

// Malformed or truncated file contents; carries the byte offset at which
// parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t byte_offset)
        : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}
    std::uint64_t byte_offset() const noexcept { return byte_offset_; }
    int exit_code() const noexcept override { return 3; }

private:
    std::uint64_t byte_offset_;
};

// Iterative routine failed to converge; carries the iteration count reached.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t iterations)
        : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
          iterations_(iterations) {}
    std::size_t iterations() const noexcept { return iterations_; }
    int exit_code() const noexcept override { return 4; }

private:
    std::size_t iterations_;
};

// Calibration precondition violated (e.g. a dead activation channel);
// carries the offending channel index.
class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, std::size_t channel)
        : Error(what + " (channel " + std::to_string(channel) + ")"),
          channel_(channel) {}
    std::size_t channel() const noexcept { return channel_; }
    int exit_code() const noexcept override { return 5; }

private:
    std::size_t channel_;
};

}  // namespace lqer
