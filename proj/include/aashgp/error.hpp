#pragma once

#include <stdexcept>
#include <string>

namespace aashgp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

// Argument outside the support of a distribution or the domain of a map.
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Linear solve failed (singular or indefinite system).
class SolverError : public Error {
public:
    using Error::Error;
};

// Covariance matrix not positive definite even after jitter.
class ConditioningError : public Error {
public:
    using Error::Error;
};

class OptimizerFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace aashgp
