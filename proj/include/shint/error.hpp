#pragma once

#include <stdexcept>
#include <string>

namespace shint {

/// Tensor dimensions or parameter shapes are inconsistent with an operation.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed or truncated file payload, or a failed read/write.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric argument outside its valid domain (non-positive sigma, non-finite weight, ...).
class ValueError : public std::invalid_argument {
public:
    explicit ValueError(const std::string& what) : std::invalid_argument(what) {}
};

} // namespace shint
