// Copyright (c) 2026, The fairlora authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fairlora {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A value lies outside the domain an operation accepts (labels, thresholds, empty input).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (rank too large, missing class, bad hyperparameter).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An adapter stack does not fit the weights it is applied to.
class CompositionError : public Error {
public:
    using Error::Error;
};

/// Malformed binary or text artifact. Carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Training diverged or otherwise failed.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// The two-party exchange could not proceed.
class ProtocolError : public Error {
public:
    using Error::Error;
};

} // namespace fairlora
