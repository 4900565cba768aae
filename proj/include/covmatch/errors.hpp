#pragma once

#include <stdexcept>

namespace covmatch {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value.
struct ParameterError : Error { using Error::Error; };

/// A matrix that must be inverted is numerically singular.
struct SingularityError : Error { using Error::Error; };

/// A covariance eigenvalue is nonpositive or too small to invert safely.
struct RankDeficiencyError : Error { using Error::Error; };

/// Matrix logarithm hit a rotation-by-pi block; the principal branch is not unique.
struct BranchAmbiguityError : Error { using Error::Error; };

/// Logarithm requested on the det < 0 component of the orthogonal group.
struct ParityError : Error { using Error::Error; };

/// Problem size exceeds an enumeration or iteration budget.
struct BudgetError : Error { using Error::Error; };

/// Graph generation exhausted its retry budget.
struct GenerationError : Error { using Error::Error; };

/// Input data is inconsistent with the assumed noise model.
struct ModelMismatchError : Error { using Error::Error; };

/// A variable carries no rank information (e.g. a constant data row).
struct DegenerateVariableError : Error { using Error::Error; };

/// Metric undefined for the given inputs (e.g. zero reference graph).
struct UndefinedMetricError : Error { using Error::Error; };

/// File could not be read, parsed or written.
struct IoError : Error { using Error::Error; };

} // namespace covmatch
