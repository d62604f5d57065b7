#pragma once

#include <stdexcept>
#include <string>

namespace dcgrid {

/// Error categories surfaced across the library and mapped 1:1 onto C API status codes.
enum class ErrorKind {
    Config,          // malformed topology or scenario structure
    Parameter,       // out-of-range physical parameter
    Domain,          // argument outside a function's domain of definition
    Singularity,     // constant-power load evaluated near v = 0
    Numerical,       // eigen/linear-algebra breakdown
    EquilibriumNotFound,
    Infeasible,      // optimisation problem without a feasible point
    TerminalSet,     // terminal law has an empty feasible set
    Divergence,      // integrator produced a non-finite state
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

const char* to_string(ErrorKind kind) noexcept;

}  // namespace dcgrid
