#pragma once

#include <stdexcept>
#include <string>

namespace crossrec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values produced by a numerical operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; the CLI maps this to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace crossrec
