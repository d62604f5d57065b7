#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcgrid/error.hpp"
#include "dcgrid/mpc.hpp"
#include "dcgrid/network.hpp"

namespace dcgrid::sim {

enum class LineDynamics { Algebraic, Dynamic };

/// Change of the nominal (and true) load at one node; applied at the nearest sample boundary.
struct LoadStep {
    double time = 0.0;
    std::size_t node = 0;
    ZipLoad load;
};

struct Scenario {
    std::string name;
    NetworkTopology topology;
    std::vector<ConverterParams> converters;
    std::vector<LoadModel> loads;      // initial nominal loads; `uncertainty` is recomputed per epoch
    std::vector<LoadStep> schedule;
    double v_ref = 0.0;
    mpc::OcpSpec ocp;
    double step = 0.0;                 // plant RK4 step [s]; 0 selects sample / 50
    double t_end = 0.0;
    LineDynamics lines = LineDynamics::Algebraic;
    std::uint64_t seed = 1;
    double initial_spread = 5.0;       // v(0) = v* +- U(-spread, spread)
    double uncertainty = 0.0;          // relative radius of the true load around the nominal one
    double voltage_tolerance = 0.0;    // 0 selects 10 V without uncertainty, 15 V otherwise
    double power_tolerance = 0.01;     // fraction of total drawn power
    double decrease_fraction = 0.99;   // required share of samples with value decrease
    double timescale_threshold = 10.0;
    std::size_t decimation = 10;
    unsigned workers = 1;
    std::vector<std::string> monitors; // empty selects every monitor

    std::size_t node_count() const noexcept { return topology.node_count(); }
    void validate() const;
    /// Plant step actually used (reduced for dynamic lines).
    double plant_step() const;
};

/// Names of the runtime monitors in report order.
const std::vector<std::string>& monitor_names();

/// Time derivative of the full state [v, i~, sigma, i_E].
Vector closed_loop_rhs(const Scenario& scenario, const Vector& state, const Vector& refs,
                       const std::vector<ZipLoad>& loads);

/// Packs a NetworkState into the integrator layout.
Vector pack(const NetworkState& state);
NetworkState unpack(const Scenario& scenario, const Vector& packed);

struct Trace {
    std::vector<double> time;
    std::vector<Vector> v;
    std::vector<Vector> i_tilde;
    std::vector<Vector> sigma;
    std::vector<Vector> i_ref;
    std::vector<Vector> load_power;      // drawn by the true loads [W]
    std::vector<Vector> provided_power;  // v (i~ + i_s) [W]
    std::vector<Vector> value;           // receding-horizon value per node
    std::vector<Vector> current_deviation;  // |i~ - u_eq|
    std::vector<double> kernel_distance;
    std::vector<double> equilibrium_gap;    // |v_eq - v|
    std::vector<double> equilibrium_offset; // |v_eq - v* 1|
};

struct MpcRecord {
    std::size_t node = 0;
    std::size_t sample = 0;
    double w = 0.0;
    double dw = 0.0;
    double u0 = 0.0;
    double value = 0.0;
    mpc::OcpStatus status = mpc::OcpStatus::Infeasible;
    int iterations = 0;
    bool feasible = false;
    bool warm_start_feasible = false;        // shifted previous solution at the measured state
    bool paired_warm_start_feasible = false; // shifted solution at the predicted state, w frozen
    double decrease_margin = 0.0;            // -delta l(x, u0) + 1e-6 - (V(x+) - V(x)), >= 0 passes
    bool terminal_feasible = false;          // measured state inside the terminal box
    double terminal_weight = 0.0;
};

struct MonitorResult {
    std::string name;
    bool pass = false;
    double metric = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct EpochCheck {
    double time = 0.0;
    double max_voltage_error = 0.0;
    double power_mismatch = 0.0;  // |provided - drawn - losses| / drawn
};

struct Statistics {
    double max_current_ratio = 0.0;   // max |i~| / I_max
    double min_current = 0.0;         // min i~ + i_s
    double max_voltage_error = 0.0;   // max |v - v*| over the whole run
    double max_kernel_distance = 0.0;
    double min_decrease_margin = 0.0;
    double decrease_share = 0.0;
    double warm_start_share = 0.0;
    std::size_t modulation_violations = 0;  // samples with v_bar outside [0, V_in]
    std::size_t infeasible_solves = 0;
    double max_dw = 0.0;
    double plant_step = 0.0;
    double timescale_ratio = 0.0;
};

struct RunResult {
    Trace trace;
    std::vector<MpcRecord> log;
    std::vector<MonitorResult> monitors;
    std::vector<EpochCheck> epochs;
    std::vector<double> terminal_weights;  // last calibrated weight per node
    Statistics stats;
    double wall_time = 0.0;
    bool completed = false;
    std::optional<ErrorKind> error_kind;
    std::string error;

    bool all_passed() const;
};

/// Runs the sampled closed loop. Errors during the run are captured and the trace is kept
/// up to the failure point; configuration errors are thrown before the run starts.
RunResult run(const Scenario& scenario);

}  // namespace dcgrid::sim
