#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace votepose {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad sizes, negative
/// bandwidth, out-of-range rate, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Keypoint selection was asked for more keypoints than the model has
/// distinct points to offer.
class KeypointCountExceedsModel : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Fewer than three point correspondences were given to the pose solver.
class InsufficientCorrespondences : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// The object-frame keypoints are (near-)collinear, so the rotation is not
/// uniquely determined.
class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed. Carries the 1-based line number at which
/// parsing failed, when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A mesh file declared zero vertices.
class EmptyModel : public Error {
 public:
  using Error::Error;
};

/// A file is in a format this library deliberately does not read
/// (e.g. binary PLY).
class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

/// A file carries a schema version this build does not understand.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// A class id was looked up that the model registry does not contain.
class UnknownModel : public Error {
 public:
  using Error::Error;
};

}  // namespace votepose
