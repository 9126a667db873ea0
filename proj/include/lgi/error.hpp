#pragma once

#include <stdexcept>
#include <string>

namespace lgi {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input files / manifests that fail their contract.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Text-format parse failure; carries the 1-based line number.
struct ParseError : ValidationError {
    ParseError(const std::string& path, int line, const std::string& msg)
        : ValidationError(path + ":" + std::to_string(line) + ": " + msg), line_number(line) {}
    int line_number;
};

struct DegenerateTet : Error {
    explicit DegenerateTet(const std::string& msg) : Error(msg) {}
};

// Tet enumeration would exceed the combinatorial budget.
struct CapExceeded : Error {
    explicit CapExceeded(const std::string& msg) : Error(msg) {}
};

}  // namespace lgi
