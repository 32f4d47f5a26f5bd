#pragma once

#include <stdexcept>
#include <string>

namespace kgmvar {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input: bad geometry, mismatched domains, parameters outside
/// their admissible range, malformed configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An iterative method failed (non-convergence, indefinite operator,
/// line-search breakdown).
class SolverError : public Error {
public:
    using Error::Error;
};

/// The zeroth-order coefficient of a pure Neumann sub-problem vanishes
/// identically, so the operator has the constants as kernel.
class DegenerateOperatorError : public SolverError {
public:
    using SolverError::SolverError;
};

/// A scenario was requested outside the hypothesis of the statement it
/// encodes (e.g. the spectral bound on the Dirichlet potential fails).
class HypothesisError : public Error {
public:
    using Error::Error;
};

}  // namespace kgmvar
