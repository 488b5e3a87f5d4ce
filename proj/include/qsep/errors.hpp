#pragma once

#include <stdexcept>
#include <string>

namespace qsep {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NotHermitian : public Error {
public:
  using Error::Error;
};

class NoConvergence : public Error {
public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

// arg(0) is undefined.
class ZeroInput : public Error {
public:
  using Error::Error;
};

class InvalidParameter : public Error {
public:
  using Error::Error;
};

class InsufficientData : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace qsep
