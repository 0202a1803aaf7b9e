#pragma once

#include <stdexcept>
#include <string>

namespace pcshap {

/// Base for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input, model definition, or configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input outside the support of a bounded variable.
class DomainError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Numerical failure: ill-conditioning, blow-up, undefined indices.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace pcshap
