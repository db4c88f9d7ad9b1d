#pragma once

#include <stdexcept>

#include "ndgrad/tensor.hpp"

namespace unihssl {

using ndgrad::ContractError;
using ndgrad::DimensionError;
using ndgrad::ValidationError;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace unihssl
