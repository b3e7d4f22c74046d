#pragma once

#include <stdexcept>
#include <string>

namespace lydim {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A point lies outside every branch domain.
class DomainError : public Error {
public:
  using Error::Error;
};

/// An orbit left the domain; `step` is the escape time.
class EscapeError : public Error {
public:
  EscapeError(const std::string& what, int step) : Error(what), step(step) {}
  int step;
};

/// A point is not in the coded invariant set.
class CodingError : public Error {
public:
  using Error::Error;
};

/// Non-finite intermediate value; `step` is the failing iterate (or -1).
class NumericalError : public Error {
public:
  NumericalError(const std::string& what, int step = -1) : Error(what), step(step) {}
  int step;
};

class ArgumentError : public Error {
public:
  using Error::Error;
};

/// Transition structure is not primitive / not stochastic.
class StructureError : public Error {
public:
  using Error::Error;
};

/// Requested resolution is finer or coarser than the coding supports.
class PrecisionError : public Error {
public:
  using Error::Error;
};

/// Root bracket endpoints have the same sign.
class BracketError : public Error {
public:
  using Error::Error;
};

/// Iterative estimate did not stabilize; carries the last bracket.
class UnresolvedError : public Error {
public:
  UnresolvedError(const std::string& what, double lo, double hi) : Error(what), lo(lo), hi(hi) {}
  double lo;
  double hi;
};

/// No horseshoe block satisfies the selection constraints.
class InfeasibleError : public Error {
public:
  using Error::Error;
};

/// Inputs contradict a known inequality (e.g. entropy above the exponent sum).
class InconsistencyError : public Error {
public:
  using Error::Error;
};

/// Config document violates the schema; `path` names the offending field.
class ConfigError : public Error {
public:
  ConfigError(const std::string& path, const std::string& what) : Error(path + ": " + what), path(path) {}
  std::string path;
};

/// Reading the config or writing reports failed.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace lydim
