#pragma once

#include <stdexcept>
#include <string>

namespace sgm {

// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Extent/rank mismatches. Messages name the offending shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Out-of-range element or label access.
class IndexError : public Error {
public:
    using Error::Error;
};

// Invalid argument or configuration value.
class ParamError : public Error {
public:
    using Error::Error;
};

// Operation invoked on a layer of the wrong paradigm.
class ParadigmError : public Error {
public:
    using Error::Error;
};

// API misuse (e.g. reusing a consumed tape, non-scalar loss).
class ContractError : public Error {
public:
    using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Filesystem failures; message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace sgm
