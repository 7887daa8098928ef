// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqdx {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape, rank or dimension mismatch in a tensor operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration (model, training or run config).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem / decoding failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Corrupt, truncated or unsupported checkpoint file. Carries the byte
/// offset at which decoding failed.
class CheckpointError : public Error {
public:
    CheckpointError(std::size_t offset, const std::string& what)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Empty input where at least one element is required (empty sequence,
/// empty label list, empty evaluation set).
class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// Training aborted because the loss became non-finite. Carries the
/// epoch and patient at which the abort happened.
class TrainAbortError : public Error {
public:
    TrainAbortError(int epoch, const std::string& patient_id, const std::string& what)
        : Error(what + " (epoch " + std::to_string(epoch) + ", patient " + patient_id + ")"),
          epoch_(epoch),
          patient_id_(patient_id) {}

    int epoch() const { return epoch_; }
    const std::string& patient_id() const { return patient_id_; }

private:
    int epoch_;
    std::string patient_id_;
};

}  // namespace seqdx
