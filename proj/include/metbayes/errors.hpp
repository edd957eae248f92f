#pragma once

#include <stdexcept>
#include <string>

namespace metbayes {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file is missing a required column.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Dataset violates a structural invariant (location under two zones, ...).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Window plan does not match the dataset's year set.
class PlanError : public Error {
 public:
  using Error::Error;
};

// Distribution parameters outside their valid region.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Argument outside the support of a density.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Factorization or solve failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Fitter input carries no information (constant or too few samples).
class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace metbayes
