#pragma once

#include <stdexcept>
#include <string>

namespace mclc {

/// Base of every error raised by the library. Callers that only care about
/// "something went wrong" catch this; the subclasses name the failure kind.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class InvalidSpec : public Error {
public:
  using Error::Error;
};

class InvalidParams : public Error {
public:
  using Error::Error;
};

class OutOfBounds : public Error {
public:
  using Error::Error;
};

class EmptyMask : public Error {
public:
  using Error::Error;
};

// Raised by refinement when the probability map has no foreground support in
// the window. It is an EmptyMask in disguise, so callers treating empty
// results uniformly can catch the parent.
class DegenerateUnary : public EmptyMask {
public:
  using EmptyMask::EmptyMask;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class LengthMismatch : public Error {
public:
  using Error::Error;
};

class MissingGroundTruth : public Error {
public:
  using Error::Error;
};

} // namespace mclc
