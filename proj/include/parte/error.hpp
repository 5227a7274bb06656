#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace parte {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input bytes. `offset` is a 1-based line number for text formats
/// and a byte offset for binary formats.
class FormatError : public Error {
public:
    enum class Unit { line, byte };

    FormatError(const std::string& what, Unit unit, std::uint64_t offset)
        : Error(what + (unit == Unit::line ? " (line " : " (byte ") + std::to_string(offset) + ")"),
          unit_(unit), offset_(offset) {}

    Unit unit() const { return unit_; }
    std::uint64_t offset() const { return offset_; }

private:
    Unit unit_;
    std::uint64_t offset_;
};

/// Well-formed input that violates a data invariant (index range, degenerate face, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition (shape mismatch, missing attribute).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid scalar argument (n = 0, empty point set, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace parte
