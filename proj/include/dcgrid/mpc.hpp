#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcgrid/network.hpp"

namespace dcgrid::mpc {

/// Local node state (v, i~, sigma).
using State = Eigen::Vector3d;

struct OcpSpec {
    int steps = 10;                  // N
    double sample = 5e-3;            // delta [s]
    int substeps = 10;               // RK4 steps per sample inside the prediction model
    double voltage_weight = 1.0;     // q [1/V^2 per s]
    double input_weight = 0.1;       // n [1/A per s]
    double contraction = 0.95;       // lambda
    double voltage_halfwidth = 10.0; // terminal box half-width in v [V]
    double current_fraction = 0.9;   // terminal box half-width in i~ as a fraction of I_max/2
    double sigma_halfwidth = 0.9;    // terminal box half-width in sigma [rad]
    double terminal_weight = 0.0;    // kappa; 0 requests calibration
    double calibration_margin = 2.0; // factor applied after the sampled calibration succeeds
    int max_iterations = 40;
    double tolerance = 1e-6;             // stationarity: predicted merit decrease relative to 1 + |merit|
    double feasibility_tolerance = 1e-7; // normalised constraint violation

    double horizon() const noexcept { return steps * sample; }
    void validate() const;
};

/// Per-node prediction model with the interconnection frozen over the horizon.
struct NodeModel {
    ConverterParams params;
    double self_conductance = 0.0;  // diagonal Laplacian entry
    ZipLoad load;                   // nominal load
    double v_cutoff = 0.0;          // below this the constant-power term is extended linearly
    double v_ref = 0.0;             // v*
};

/// Nominal load current with a C1 linear extension below the cutoff.
double model_load_current(const NodeModel& m, double v);
double model_load_slope(const NodeModel& m, double v);

/// Continuous dynamics F(x, u, d) + E w with E = (-1/C, 0, 0).
State node_rhs(const NodeModel& m, const State& x, double u, double w);

struct Transition {
    State next;
    Eigen::Matrix3d dx;  // d next / d x
    State du;            // d next / d u
};

/// One sample of zero-order-held u through `spec.substeps` RK4 steps; Jacobians when requested.
Transition transition(const NodeModel& m, const State& x, double u, double w, const OcpSpec& spec,
                      bool with_jacobian = false);

struct SteadyState {
    double v = 0.0;
    double u = 0.0;
    bool interior = true;
};

/// Voltage/input target closest to v*. Interior inputs return v* exactly.
SteadyState steady_state_solve(const NodeModel& m, double w);

struct LocalEquilibrium {
    State x;
    double u = 0.0;
};

LocalEquilibrium local_equilibrium(const NodeModel& m, double w);

/// Polytope {x : H (x - x_eq) <= h} expressed relative to its centre.
struct Polytope {
    Eigen::Matrix<double, Eigen::Dynamic, 3> normals;
    Vector offsets;
};

/// Box x_eq +- (dV, f I_max/2, sigma_halfwidth) intersected with the state constraints.
Polytope terminal_box(const NodeModel& m, const State& x_eq, const OcpSpec& spec);

/// Minkowski gauge of x - x_eq; throws when an offset is not positive.
double gauge(const State& x, const State& x_eq, const Polytope& polytope);

/// Input closest to u_eq whose one-sample successor satisfies gauge(x+) <= lambda gauge(x).
/// Throws a terminal-set error when no admissible input exists.
double terminal_control(const NodeModel& m, const State& x, const State& x_eq, double u_eq, double w,
                        const Polytope& polytope, const OcpSpec& spec);

/// Everything a node needs to solve one receding-horizon problem.
struct Problem {
    NodeModel model;
    OcpSpec spec;
    double w = 0.0;
    SteadyState target;
    LocalEquilibrium equilibrium;
    Polytope terminal;
    double terminal_weight = 1.0;
};

/// Builds targets and terminal set. A zero weight in `spec` falls back to `terminal_weight`.
Problem make_problem(const NodeModel& m, double w, const OcpSpec& spec, double terminal_weight = 1.0);

struct Calibration {
    double weight = 1.0;
    int samples = 0;
    int skipped = 0;       // grid points where the terminal law had no admissible input
    bool satisfied = false;
};

/// Doubles the terminal weight from 1 until the one-step decrease holds on a 5^3 grid over the terminal box.
Calibration calibrate_terminal_weight(const Problem& problem);

double stage_cost(const Problem& problem, const State& x, double u);
double terminal_cost(const Problem& problem, const State& x);

struct Evaluation {
    std::vector<State> states;  // N + 1 knots
    double cost = 0.0;
    double violation = 0.0;     // normalised, 0 when feasible
    std::string worst;          // most violated constraint
};

Evaluation evaluate(const Problem& problem, const State& x0, std::span<const double> inputs);

enum class OcpStatus { Converged, MaxIterations, Infeasible };

struct OcpSolution {
    std::vector<double> inputs;
    std::vector<State> states;
    double value = 0.0;
    double violation = 0.0;
    OcpStatus status = OcpStatus::Infeasible;
    int iterations = 0;
    std::string binding;  // most violated constraint when infeasible
    bool warm_start_feasible = false;
    double warm_start_cost = 0.0;

    bool feasible() const noexcept { return status != OcpStatus::Infeasible; }
};

/// Single-shooting SQP with an l1 merit function. The returned point is the cheapest feasible
/// iterate seen, the warm start included.
OcpSolution solve_ocp(const Problem& problem, const State& x0, std::span<const double> warm_start);

/// Drops the first input of `previous`, simulates the tail from x0 and appends the terminal law.
std::vector<double> shifted_warm_start(const Problem& problem, const State& x0, std::span<const double> previous);

const char* to_string(OcpStatus status) noexcept;

}  // namespace dcgrid::mpc
