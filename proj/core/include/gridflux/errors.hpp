#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridflux {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input text could not be parsed. Carries the offending section and, where
/// known, the 1-based line number (0 = not line-specific).
struct ParseError : Error {
    ParseError(std::string section_, std::size_t line_, const std::string& what_)
        : Error(what_), section(std::move(section_)), line(line_) {}
    std::string section;
    std::size_t line;
};

/// Structurally well-formed input that violates a model invariant
/// (e.g. zero or multiple slack buses, branch to an unknown bus).
struct ValidationError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

/// Linear system singular to working precision. `iteration` is the solver
/// iteration during which the factorization failed (-1 outside a solver loop).
struct SingularMatrixError : Error {
    explicit SingularMatrixError(const std::string& what_, int iteration_ = -1)
        : Error(what_), iteration(iteration_) {}
    int iteration;
};

}  // namespace gridflux
