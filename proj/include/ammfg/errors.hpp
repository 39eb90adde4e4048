#pragma once

#include <stdexcept>

namespace ammfg {

// Error taxonomy; the CLI maps these to exit codes
// (config 2, validation 3, numerical 4, convergence 5, io 6).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Pool reserve dipped below the configured floor.
struct floor_error : numerical_error {
    using numerical_error::numerical_error;
};
// Explicit-scheme stability bound violated.
struct cfl_error : numerical_error {
    using numerical_error::numerical_error;
};
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ammfg
