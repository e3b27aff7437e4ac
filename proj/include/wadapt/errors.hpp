#pragma once

#include <stdexcept>
#include <string>

namespace wadapt {

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible.
class DimensionError : public Error {
   public:
    using Error::Error;
};

// A caller broke a documented precondition.
class ContractError : public Error {
   public:
    using Error::Error;
};

class ConfigError : public Error {
   public:
    using Error::Error;
};

class ParseError : public Error {
   public:
    using Error::Error;
};

// Zero-norm vectors and similar inputs where a quantity is undefined.
class DegenerateInputError : public Error {
   public:
    using Error::Error;
};

class SelectionError : public Error {
   public:
    using Error::Error;
};

// Non-finite loss, gradient or emission during optimization.
class TrainingError : public Error {
   public:
    using Error::Error;
};

class MissingInputError : public Error {
   public:
    using Error::Error;
};

}  // namespace wadapt
