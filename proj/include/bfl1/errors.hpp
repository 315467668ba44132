#pragma once

#include <stdexcept>
#include <string>

namespace bfl1 {

// Invalid configuration: bad dimensions, out-of-range hyperparameters,
// unknown keys, mismatched vector lengths.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed external data: unreadable files, bad CSV rows, truncated JSON.
struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bfl1
