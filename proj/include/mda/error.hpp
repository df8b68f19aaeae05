#pragma once

#include <stdexcept>
#include <string>

namespace mda {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A plane-wave channel where the interface response is undefined
/// (both admittances vanish, or the Fresnel denominator is exactly zero).
class SingularChannelError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a physical formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Angle or wavevector outside the propagating range of the requested medium.
class OutOfDomainError : public DomainError {
 public:
  using DomainError::DomainError;
};

class InvalidApertureError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Inconsistent image or grid geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed fields in an input document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Image file that is not a single-channel 16-bit PNG or PGM.
class ImageFormatError : public Error {
 public:
  using Error::Error;
};

class IllConditionedFitError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace mda
