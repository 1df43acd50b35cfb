#pragma once

#include <stdexcept>
#include <string>

namespace xlab {

// Bad or inconsistent input data (malformed files, dangling ids, shape mismatch).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A computation that cannot produce a meaningful result from valid input.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or command-line usage.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parse failure in a text format, carrying the 1-based line number.
class FormatError : public DataError {
public:
    FormatError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), detail_(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::size_t line_;
};

}  // namespace xlab
