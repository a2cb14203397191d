#pragma once

#include <stdexcept>
#include <string>

namespace rnls {

/// Base class for all rnls errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad or inconsistent user configuration (file or flags).
struct ConfigError : Error {
  using Error::Error;
};

/// Parameter combination outside the validity domain of an operation.
struct InvalidConfig : Error {
  using Error::Error;
};

/// A site has more than one resonant triplet (the tangential set is not
/// admissible).
struct AmbiguousResonance : Error {
  using Error::Error;
};

/// A homological denominator vanished on a monomial selected for removal.
struct ZeroDivisor : Error {
  using Error::Error;
};

/// An operation produced a term outside the mode truncation radius.
struct TruncationOverflow : Error {
  using Error::Error;
};

/// The truncation radius cannot accommodate the requested Toeplitz window.
struct TruncationTooSmall : Error {
  using Error::Error;
};

/// Phase fit failed (amplitude collapse or ambiguous unwrapping).
struct DegenerateFit : Error {
  using Error::Error;
};

/// Field amplitude exceeded the configured bound during integration.
struct BlowUp : Error {
  using Error::Error;
};

}  // namespace rnls
