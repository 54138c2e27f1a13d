#pragma once

#include <stdexcept>
#include <string>

namespace homsim {

/// Base class for all toolkit errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or violated model invariant.
class config_error : public error {
public:
    using error::error;
};

/// File access or data format problem.
class io_error : public error {
public:
    using error::error;
};

/// Mismatched frame / tensor / image geometry.
class geometry_error : public io_error {
public:
    using io_error::io_error;
};

/// Fit non-convergence, quadrature tolerance failure, ill-posed inversion.
class numeric_error : public error {
public:
    using error::error;
};

/// Process exit codes used by the command-line tool.
enum exit_code : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_io = 3,
    exit_numeric = 4,
};

} // namespace homsim
