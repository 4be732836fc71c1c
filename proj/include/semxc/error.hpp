#pragma once

#include <stdexcept>
#include <string>

namespace semxc {

/// Error classes map onto distinct CLI exit codes.
enum class ErrorKind {
    kInput = 3,        // malformed file, bad record, missing reference
    kConsistency = 4,  // stale artifact, hash mismatch, invalid arguments
    kNumeric = 5,      // non-finite loss, divergence
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class ConsistencyError : public Error {
public:
    explicit ConsistencyError(const std::string& what) : Error(ErrorKind::kConsistency, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

}  // namespace semxc
