#pragma once

#include <stdexcept>
#include <string>

namespace cmm {

// Base for every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Logit row / label set / dataset shape does not match the relation schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Non-finite logits, losses, gradients or parameters.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid user-facing configuration; message names the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Synthetic generator could not satisfy a constraint.
class GenerationError : public Error {
public:
    using Error::Error;
};

} // namespace cmm
