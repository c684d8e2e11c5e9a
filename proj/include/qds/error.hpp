#pragma once

#include <stdexcept>
#include <string>

namespace qds {

/// Input data violates the record schema or an operation precondition.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem or serialization failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qds
