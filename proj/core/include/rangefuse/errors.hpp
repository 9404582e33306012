#pragma once

#include <stdexcept>
#include <string>

namespace rangefuse {

// Caller broke a documented precondition (shape mismatch, bad key arity,
// misaligned directories, malformed LUT). The CLI maps this to exit code 2.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Filesystem or codec failure. The CLI maps this to exit code 1.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rangefuse
