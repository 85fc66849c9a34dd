#pragma once

#include <stdexcept>
#include <string>

namespace nvpd {

// Parameter or argument validation failure.
struct InvalidParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Lifetime shorter than the radiative rate alone allows.
struct InvalidLifetime : InvalidParams {
    using InvalidParams::InvalidParams;
};

// Null space of the generator has dimension > 1.
struct AmbiguousSteadyState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Steady-state PL is zero, trace cannot be normalized.
struct NormalizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Trace preprocessing failure (no threshold crossing, missing AOM rise).
struct PreprocessError : std::runtime_error {
    PreprocessError(const std::string& msg, bool aom_rise_not_found = false)
        : std::runtime_error(msg), aom_rise_not_found(aom_rise_not_found) {}
    bool aom_rise_not_found;
};

// Optimizer failed to converge on every start.
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File / format problems on the CLI surface.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config document does not match the expected schema.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nvpd
