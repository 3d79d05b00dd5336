#pragma once

#include <stdexcept>
#include <string>

namespace jcep {

// Base of every failure raised by the library. Sub-types map onto the
// CLI exit-code contract (see tools/jcep.cpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameters : public Error { using Error::Error; };

// |Δ_E| fell below the degeneracy floor; the eigenvectors coalesce.
class DegenerateEigensystem : public Error { using Error::Error; };

class NoEPFound : public Error { using Error::Error; };
class NonConverged : public Error { using Error::Error; };

class InvalidLoop : public Error { using Error::Error; };
class ReferenceOnPath : public Error { using Error::Error; };

class StepUnderflow : public Error { using Error::Error; };

// Both label assignments score the same; the step straddles a (near) EP.
class AmbiguousAssignment : public Error { using Error::Error; };

class EmptyLevelSet : public Error { using Error::Error; };
class PlaneMismatch : public Error { using Error::Error; };
class MismatchedRecords : public Error { using Error::Error; };

class ConfigError : public Error { using Error::Error; };

} // namespace jcep
