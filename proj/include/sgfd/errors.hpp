#pragma once

#include <stdexcept>
#include <string>

namespace sgfd {

// Error taxonomy. The CLI maps these onto exit codes:
//   IoError / ParseError            -> 1 (missing or malformed input)
//   ValidationError / DimensionError
//   DomainError / IndexError
//   ConfigError                     -> 2 (contract violation)
//   NumericError                    -> 3 (numerical divergence)

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sgfd
