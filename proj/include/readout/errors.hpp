#pragma once

#include <stdexcept>
#include <string>

namespace readout {

struct PoleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateModeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepSizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SpanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WindowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroSeparationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateComponentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceDriftError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace readout
