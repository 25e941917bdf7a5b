#pragma once

#include <stdexcept>
#include <string>

namespace obsbench {

// Bad values or out-of-range arguments. CLI exit code 1.
struct domain_error : std::runtime_error {
    explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (CSV/JSON). CLI exit code 1.
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Gain design failed (unobservable system, non-Hurwitz result). CLI exit code 2.
struct design_error : std::runtime_error {
    explicit design_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Parameter/OCV identification failed.
struct identification_error : std::runtime_error {
    explicit identification_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown at runtime (e.g. covariance lost positive definiteness).
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace obsbench
