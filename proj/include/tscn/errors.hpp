#pragma once

#include <stdexcept>
#include <string>

namespace tscn {

// Shapes or lengths of arguments disagree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed, missing, or inconsistent on-disk data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A NaN or Inf appeared during training or inference.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration file problems; message names the field and line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tscn
