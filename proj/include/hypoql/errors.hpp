#ifndef HYPOQL_ERRORS_HPP
#define HYPOQL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hypoql {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// An evaluator produced an output of the wrong shape.
class ShapeMismatchError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be symmetric positive definite failed its Cholesky
/// factorization. The message names the offending block/state.
class NotPositiveDefiniteError : public Error {
public:
    using Error::Error;
};

/// Trajectory blow-up during simulation; carries the blow-up time.
class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, double t) : Error(what), time(t) {}
    double time;
};

class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

/// Quadrature posterior mean requested for a block of dimension > 2.
class DimensionTooHighError : public Error {
public:
    using Error::Error;
};

/// All quadrature weights vanished (field was -inf on the whole grid).
class DegenerateMassError : public Error {
public:
    using Error::Error;
};

/// Metropolis-Hastings chain started at a point with -inf target.
class BadInitialPointError : public Error {
public:
    using Error::Error;
};

/// Post-burn-in acceptance rate below 1%.
class PathologicalChainError : public Error {
public:
    using Error::Error;
};

/// Optimizer never saw a finite field value.
class AllEvaluationsRejectedError : public Error {
public:
    using Error::Error;
};

/// A plug-in information matrix block is not invertible.
class SingularGammaError : public Error {
public:
    using Error::Error;
};

/// H_x has rank below d_Y at some probe state.
class RankDeficientHxError : public Error {
public:
    using Error::Error;
};

/// CSV parsing problems, one subtype per contract violation.
class CsvError : public Error {
public:
    using Error::Error;
};
class MalformedHeaderError : public CsvError {
public:
    using CsvError::CsvError;
};
class NonEquispacedError : public CsvError {
public:
    using CsvError::CsvError;
};
class NonNumericCellError : public CsvError {
public:
    NonNumericCellError(const std::string& what, long row, long col)
        : CsvError(what), row(row), col(col) {}
    long row;
    long col;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A stage of the adaptive pipeline failed; wraps the cause.
class StageError : public Error {
public:
    StageError(int stage, const std::string& what)
        : Error("stage " + std::to_string(stage) + ": " + what), stage(stage) {}
    int stage;
};

/// More than 5% of Monte Carlo replicates failed.
class TooManyFailuresError : public Error {
public:
    using Error::Error;
};

} // namespace hypoql

#endif
