#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace wemsfem {

using Complex = std::complex<double>;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
public:
  using Error::Error;
};

class MeshError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Raised when a factorization meets a pivot that is zero to working
/// precision. `pivot_index` refers to the elimination order.
class SingularMatrixError : public Error {
public:
  SingularMatrixError(const std::string& what, long pivot_index, double pivot_magnitude)
      : Error(what), pivot_index_(pivot_index), pivot_magnitude_(pivot_magnitude) {}

  long pivot_index() const noexcept { return pivot_index_; }
  double pivot_magnitude() const noexcept { return pivot_magnitude_; }

private:
  long pivot_index_;
  double pivot_magnitude_;
};

/// Failure of a local (element or neighborhood) problem.
class LocalSolveError : public Error {
public:
  using Error::Error;
};

/// Selects between the serial reference loop and the OpenMP kernel.
/// Both paths write results into preallocated per-item slots, so they
/// produce bitwise-identical output.
enum class Execution { serial, parallel };

}  // namespace wemsfem
