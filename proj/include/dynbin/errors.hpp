#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynbin {

/// Malformed user input: config files, CSV data, prior files.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input error pinned to a line of a text file (1-based).
class LineError : public InputError {
public:
    LineError(const std::string& source, std::size_t line, const std::string& what)
        : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Numerical failure inside a chain (non-finite log-posterior and similar).
class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dynbin
