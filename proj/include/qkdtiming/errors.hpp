#pragma once

#include <stdexcept>
#include <string>

namespace qkdtiming {

/// Invalid configuration or argument values. CLI maps this to exit status 1.
class config_error : public std::invalid_argument {
public:
    explicit config_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Malformed input files (bad line, wrong column count, ...). Exit status 2.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Peak fitting failed: empty selection, missing peak, or non-convergence.
/// Exit status 2.
class fit_error : public std::runtime_error {
public:
    explicit fit_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace qkdtiming
