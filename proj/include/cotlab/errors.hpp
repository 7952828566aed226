#pragma once

#include <stdexcept>
#include <string>

namespace cotlab {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LengthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CompatibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FrozenViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StaleRecordError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SampleSizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cotlab
