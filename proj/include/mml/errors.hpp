#pragma once

#include <stdexcept>
#include <string>

namespace mml {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// evaluation of a primitive outside its domain (log of a non-positive value,
// division by zero, ...); carries the offending node id in the message
struct DomainError : Error {
    DomainError(const std::string& what, std::size_t node_id)
        : Error(what + " (node " + std::to_string(node_id) + ")"), node(node_id) {}
    std::size_t node;
};

struct ShapeError : Error {
    using Error::Error;
};

struct StateError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct UnsupportedError : Error {
    using Error::Error;
};

struct NotFactorialError : Error {
    using Error::Error;
};

}  // namespace mml
