#pragma once

#include <stdexcept>
#include <string>

namespace stobas {

// Error categories map to CLI exit codes: validation -> 2, numerical -> 3.
enum class ErrorKind { validation, numerical, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

// Validation failures.
struct NegativeEntry : ValidationError { using ValidationError::ValidationError; };
struct RowSumViolation : ValidationError { using ValidationError::ValidationError; };
struct DuplicateEntry : ValidationError { using ValidationError::ValidationError; };
struct DimensionMismatch : ValidationError { using ValidationError::ValidationError; };
struct EmptyTarget : ValidationError { using ValidationError::ValidationError; };
struct OverlappingSets : ValidationError { using ValidationError::ValidationError; };
struct ExitProbabilityViolation : ValidationError { using ValidationError::ValidationError; };
struct DomainViolation : ValidationError { using ValidationError::ValidationError; };
struct InvalidBounds : ValidationError { using ValidationError::ValidationError; };
struct InvalidDelta : ValidationError { using ValidationError::ValidationError; };
struct WeightViolation : ValidationError { using ValidationError::ValidationError; };
struct SizeGuard : ValidationError { using ValidationError::ValidationError; };
struct EmptyRow : ValidationError { using ValidationError::ValidationError; };

// Numerical failures.
struct SolverDivergence : NumericalError { using NumericalError::NumericalError; };
struct IntegrationFailure : NumericalError { using NumericalError::NumericalError; };
struct NonFiniteState : NumericalError { using NumericalError::NumericalError; };

} // namespace stobas
