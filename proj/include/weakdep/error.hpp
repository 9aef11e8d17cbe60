#pragma once

#include <stdexcept>
#include <string>

namespace weakdep {

/// Raised when a process spec, configuration or argument violates its contract.
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot deliver a result (e.g. embedding failure).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw SpecError(message);
}

}  // namespace weakdep
