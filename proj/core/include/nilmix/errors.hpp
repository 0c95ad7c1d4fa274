#pragma once

#include <stdexcept>
#include <string>

namespace nilmix {

// Base for all library errors. Subclasses exist so callers can catch by
// failure class; the what() string carries the specifics (indices, values).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- construction / validation -------------------------------------------
struct DimensionMismatch : Error { using Error::Error; };
struct NonFiniteCoordinate : Error { using Error::Error; };

struct AntisymmetryViolation : Error { using Error::Error; };
struct JacobiViolation : Error { using Error::Error; };
struct NotNilpotent : Error { using Error::Error; };
struct BasisNotMalcevOrdered : Error { using Error::Error; };
struct LatticeNotClosed : Error { using Error::Error; };

struct BracketNotPreserved : Error { using Error::Error; };
struct LatticeNotPreserved : Error { using Error::Error; };
struct NotUnimodular : Error { using Error::Error; };

// --- spectral / numerical ---------------------------------------------
struct IllConditioned : Error { using Error::Error; };
struct ZeroDirection : Error { using Error::Error; };
struct SubspaceRational : Error { using Error::Error; };

// --- observables ----------------------------------------------------------
struct SupportTooLarge : Error { using Error::Error; };

// --- experiments ------------------------------------------------------
struct SearchBoxTooLarge : Error { using Error::Error; };
struct AllPointsNoiseDominated : Error { using Error::Error; };
struct NotErgodic : Error { using Error::Error; };
struct HorizonExceeded : Error { using Error::Error; };
struct NotCentered : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct NonPositiveError : Error { using Error::Error; };
struct NegativeVarianceEstimate : Error { using Error::Error; };
struct ZeroVariance : Error { using Error::Error; };

// --- I/O -------------------------------------------------------------------
struct ConfigError : Error { using Error::Error; };

}  // namespace nilmix
