#pragma once

#include <stdexcept>
#include <string>

namespace eqgraph {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Rigid fitting on collinear, coincident or too few points.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// Fewer than three consistent correspondences survived.
class CorrespondenceFailure : public Error {
 public:
  using Error::Error;
};

class KindMismatch : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files, schema violations, checksum and version failures.
class DataError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace eqgraph
