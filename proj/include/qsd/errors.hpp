#pragma once

#include <stdexcept>
#include <string>

namespace qsd {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad user-supplied configuration or arguments (CLI exit code 2).
struct ValidationError : Error {
    using Error::Error;
};

/// Evaluation outside the model's open domain.
struct DomainError : Error {
    using Error::Error;
};

/// Non-finite value produced while evaluating a model quantity.
struct EvalError : Error {
    using Error::Error;
};

/// Every particle of the Fleming-Viot system was killed in one step.
/// Signals that dt is too large or N too small for the configuration.
struct SimultaneousExtinctionError : Error {
    using Error::Error;
};

/// Too few Monte Carlo paths survived to the requested horizon.
struct SurvivorStarvationError : Error {
    using Error::Error;
};

/// Eigen-solver failed to converge or produced an invalid ground state.
struct SolverError : Error {
    using Error::Error;
};

/// Histograms whose supports cannot be compared.
struct IncompatibleRangesError : Error {
    using Error::Error;
};

/// File I/O and parse failures.
struct IoError : Error {
    using Error::Error;
};

}  // namespace qsd
