#pragma once

#include <stdexcept>
#include <string>

namespace rch {

// Malformed input text (scenario files, CLI values).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally well-formed input that violates a model invariant.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Optimization failed in a way the caller cannot recover from
// (infeasible model where feasibility was required, limit hit without
// an incumbent, numerical breakdown).
struct SolveError : std::runtime_error {
  explicit SolveError(const std::string& what) : std::runtime_error(what) {}
};

// File system trouble while reading or writing artifacts.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rch
