#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dcgrid {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Power line between two converters. Orientation is normalised to (lower id -> higher id).
struct Edge {
    std::size_t source = 0;
    std::size_t sink = 0;
    double resistance = 0.0;  // Ohm
    double inductance = 0.0;  // H, zero for purely resistive lines
};

class NetworkTopology {
public:
    NetworkTopology() = default;

    /// Checks node ids, self-loops and duplicate undirected edges. Connectivity and
    /// line resistances are checked by the operations that need them.
    NetworkTopology(std::size_t node_count, std::vector<Edge> edges);

    std::size_t node_count() const noexcept { return node_count_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    /// Connected components as sorted node lists, ordered by their smallest node.
    std::vector<std::vector<std::size_t>> components() const;
    bool is_connected() const { return components().size() <= 1; }

    /// Throws a configuration error listing the components when the graph is not connected.
    void require_connected() const;

    /// Neighbours of `node` in ascending order.
    std::vector<std::size_t> neighbours(std::size_t node) const;

private:
    std::size_t node_count_ = 0;
    std::vector<Edge> edges_;
};

/// Signed |E| x |V| node-edge matrix: +1 at the source, -1 at the sink.
Matrix build_incidence(const NetworkTopology& topology);

/// Weighted Laplacian B^T diag(1/r_e) B.
Matrix laplacian(const NetworkTopology& topology);

/// Line conductances 1/r_e in edge order.
Vector line_conductances(const NetworkTopology& topology);

/// Electrical and controller constants of one buck converter.
struct ConverterParams {
    double inductance = 0.0;    // L_i [H]
    double resistance = 0.0;    // r_i [Ohm]
    double capacitance = 0.0;   // C_i [F]
    double v_in = 0.0;          // input voltage [V]
    double i_max = 0.0;         // current rating [A]
    double k_p = 0.0;           // proportional gain [Ohm]
    double k_i = 0.0;           // integral gain
    double v_lower = 0.0;       // voltage band of the state constraint set [V]
    double v_upper = 0.0;

    double i_shift() const noexcept { return 0.5 * i_max; }
    double authority() const noexcept { return 0.5 * (resistance + k_p) * i_max; }
    double input_bound() const noexcept { return 0.5 * i_max; }

    /// Throws a parameter error naming `node` when a constant is out of range.
    void validate(std::size_t node) const;
};

/// ZIP load coefficients: conductance 1/R_L [S], constant current I_L [A], constant power P_L [W].
struct ZipLoad {
    double conductance = 0.0;
    double current = 0.0;
    double power = 0.0;

    static ZipLoad constant_power(double p) { return {0.0, 0.0, p}; }
    double norm() const noexcept;
    bool is_zero() const noexcept { return conductance == 0.0 && current == 0.0 && power == 0.0; }
    friend bool operator==(const ZipLoad&, const ZipLoad&) = default;
};

/// g(v) . d for a ZIP load; throws a singularity error when v <= v_cutoff and P_L > 0.
double zip_current(const ZipLoad& d, double v, double v_cutoff);
/// d/dv of zip_current (same domain).
double zip_current_slope(const ZipLoad& d, double v, double v_cutoff);

struct LoadModel {
    ZipLoad nominal;       // d-bar, known to the controller
    ZipLoad actual;        // true d drawn by the load
    double uncertainty = 0.0;  // gamma_d, Euclidean radius around the nominal point
    double v_cutoff = 0.0;     // lower voltage limit of the constant-power term

    void validate(std::size_t node) const;
};

double load_current(const LoadModel& load, double v, bool use_nominal);

/// Full network state. `line_currents` is empty unless line dynamics are simulated.
struct NetworkState {
    Vector v;
    Vector i_tilde;
    Vector sigma;
    Vector line_currents;

    std::size_t size() const noexcept { return static_cast<std::size_t>(v.size()); }
};

/// Membership of one node in X_i: v in the band, |i~| <= I_max/2, |sigma| <= pi/2.
bool within_constraints(const ConverterParams& p, double v, double i_tilde, double sigma, double slack = 0.0);

struct TimescaleReport {
    double node_min = 0.0;   // smallest node time constant [s]
    double edge_max = 0.0;   // largest line time constant L_e/r_e [s]
    double ratio = 0.0;      // node_min / edge_max, +inf for resistive lines
    double threshold = 10.0;
    std::size_t limiting_node = 0;
    bool pass = false;
};

TimescaleReport validate_timescale(std::span<const ConverterParams> params, const NetworkTopology& topology,
                                   std::span<const LoadModel> loads, double threshold = 10.0);

}  // namespace dcgrid
