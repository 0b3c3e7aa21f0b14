#pragma once

#include <stdexcept>
#include <string>

namespace idstr {

/// Raised when no origin-to-absorbing path survives (drift pruning, zero
/// probabilities, or every trace of a cluster dropped).
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input data (dataset files, encoder spec strings, config values).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace idstr
