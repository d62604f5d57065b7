#include "dcgrid/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "dcgrid/error.hpp"

namespace dcgrid {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return "configuration error";
        case ErrorKind::Parameter: return "parameter error";
        case ErrorKind::Domain: return "domain error";
        case ErrorKind::Singularity: return "singularity error";
        case ErrorKind::Numerical: return "numerical error";
        case ErrorKind::EquilibriumNotFound: return "equilibrium not found";
        case ErrorKind::Infeasible: return "infeasible problem";
        case ErrorKind::TerminalSet: return "terminal set violation";
        case ErrorKind::Divergence: return "divergence";
    }
    return "unknown error";
}

NetworkTopology::NetworkTopology(std::size_t node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
    if (node_count_ == 0) fail(ErrorKind::Config, "network needs at least one node");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        auto& edge = edges_[e];
        if (edge.source >= node_count_ || edge.sink >= node_count_) {
            std::ostringstream msg;
            msg << "edge " << e << " (" << edge.source << "-" << edge.sink << ") references a node outside [0, "
                << node_count_ << ")";
            fail(ErrorKind::Config, msg.str());
        }
        if (edge.source == edge.sink) {
            fail(ErrorKind::Config, "edge " + std::to_string(e) + " is a self-loop on node " +
                                        std::to_string(edge.source));
        }
        if (edge.source > edge.sink) std::swap(edge.source, edge.sink);
        if (!seen.emplace(edge.source, edge.sink).second) {
            fail(ErrorKind::Config, "edge " + std::to_string(e) + " duplicates line " + std::to_string(edge.source) +
                                        "-" + std::to_string(edge.sink));
        }
    }
}

std::vector<std::vector<std::size_t>> NetworkTopology::components() const {
    std::vector<std::size_t> parent(node_count_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& e : edges_) {
        auto a = find(e.source);
        auto b = find(e.sink);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> slot(node_count_, node_count_);
    for (std::size_t n = 0; n < node_count_; ++n) {
        auto root = find(n);
        if (slot[root] == node_count_) {
            slot[root] = groups.size();
            groups.emplace_back();
        }
        groups[slot[root]].push_back(n);
    }
    return groups;
}

void NetworkTopology::require_connected() const {
    auto groups = components();
    if (groups.size() <= 1) return;
    std::ostringstream msg;
    msg << "network is disconnected into " << groups.size() << " components:";
    for (const auto& g : groups) {
        msg << " {";
        for (std::size_t k = 0; k < g.size(); ++k) msg << (k ? "," : "") << g[k];
        msg << "}";
    }
    fail(ErrorKind::Config, msg.str());
}

std::vector<std::size_t> NetworkTopology::neighbours(std::size_t node) const {
    std::vector<std::size_t> out;
    for (const auto& e : edges_) {
        if (e.source == node) out.push_back(e.sink);
        if (e.sink == node) out.push_back(e.source);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Matrix build_incidence(const NetworkTopology& topology) {
    topology.require_connected();
    Matrix b = Matrix::Zero(static_cast<Eigen::Index>(topology.edge_count()),
                            static_cast<Eigen::Index>(topology.node_count()));
    for (std::size_t e = 0; e < topology.edge_count(); ++e) {
        const auto& edge = topology.edges()[e];
        b(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(edge.source)) = 1.0;
        b(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(edge.sink)) = -1.0;
    }
    return b;
}

Vector line_conductances(const NetworkTopology& topology) {
    Vector g(static_cast<Eigen::Index>(topology.edge_count()));
    for (std::size_t e = 0; e < topology.edge_count(); ++e) {
        const auto& edge = topology.edges()[e];
        if (!(edge.resistance > 0.0) || !std::isfinite(edge.resistance)) {
            std::ostringstream msg;
            msg << "edge " << e << " (" << edge.source << "-" << edge.sink << ") has non-positive resistance "
                << edge.resistance;
            fail(ErrorKind::Parameter, msg.str());
        }
        g(static_cast<Eigen::Index>(e)) = 1.0 / edge.resistance;
    }
    return g;
}

Matrix laplacian(const NetworkTopology& topology) {
    const Vector g = line_conductances(topology);
    const Matrix b = build_incidence(topology);
    return b.transpose() * g.asDiagonal() * b;
}

void ConverterParams::validate(std::size_t node) const {
    auto check = [&](double value, const char* name) {
        if (!(value > 0.0) || !std::isfinite(value)) {
            std::ostringstream msg;
            msg << "node " << node << ": " << name << " must be positive, got " << value;
            fail(ErrorKind::Parameter, msg.str());
        }
    };
    check(inductance, "L");
    check(resistance, "r");
    check(capacitance, "C");
    check(v_in, "V_in");
    check(i_max, "I_max");
    check(k_p, "k_P");
    check(k_i, "k_I");
    if (!(v_lower >= 0.0 && v_upper > v_lower)) {
        std::ostringstream msg;
        msg << "node " << node << ": voltage band [" << v_lower << ", " << v_upper << "] is empty";
        fail(ErrorKind::Parameter, msg.str());
    }
}

double ZipLoad::norm() const noexcept {
    return std::sqrt(conductance * conductance + current * current + power * power);
}

double zip_current(const ZipLoad& d, double v, double v_cutoff) {
    if (d.power != 0.0 && v <= v_cutoff) {
        std::ostringstream msg;
        msg << "constant-power load evaluated at v = " << v << " V, below the cutoff " << v_cutoff << " V";
        fail(ErrorKind::Singularity, msg.str());
    }
    double i = d.conductance * v + d.current;
    if (d.power != 0.0) i += d.power / v;
    return i;
}

double zip_current_slope(const ZipLoad& d, double v, double v_cutoff) {
    if (d.power != 0.0 && v <= v_cutoff) {
        fail(ErrorKind::Singularity, "constant-power load slope evaluated below the cutoff voltage");
    }
    double s = d.conductance;
    if (d.power != 0.0) s -= d.power / (v * v);
    return s;
}

void LoadModel::validate(std::size_t node) const {
    for (const ZipLoad* d : {&nominal, &actual}) {
        if (d->conductance < 0.0 || d->current < 0.0 || d->power < 0.0) {
            fail(ErrorKind::Parameter, "node " + std::to_string(node) + ": load coefficients must be non-negative");
        }
    }
    if (uncertainty < 0.0) fail(ErrorKind::Parameter, "node " + std::to_string(node) + ": gamma_d must be >= 0");
    if (!(v_cutoff > 0.0)) fail(ErrorKind::Parameter, "node " + std::to_string(node) + ": load cutoff must be > 0");
    const double dist = std::sqrt(std::pow(nominal.conductance - actual.conductance, 2) +
                                  std::pow(nominal.current - actual.current, 2) +
                                  std::pow(nominal.power - actual.power, 2));
    if (dist > uncertainty * (1.0 + 1e-12) + 1e-12) {
        fail(ErrorKind::Parameter, "node " + std::to_string(node) + ": true load lies outside the uncertainty ball");
    }
}

double load_current(const LoadModel& load, double v, bool use_nominal) {
    return zip_current(use_nominal ? load.nominal : load.actual, v, load.v_cutoff);
}

bool within_constraints(const ConverterParams& p, double v, double i_tilde, double sigma, double slack) {
    constexpr double half_pi = 1.5707963267948966;
    return v >= p.v_lower - slack && v <= p.v_upper + slack && std::abs(i_tilde) <= p.input_bound() + slack &&
           std::abs(sigma) <= half_pi + slack;
}

TimescaleReport validate_timescale(std::span<const ConverterParams> params, const NetworkTopology& topology,
                                   std::span<const LoadModel> loads, double threshold) {
    TimescaleReport rep;
    rep.threshold = threshold;
    rep.node_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        const double power = i < loads.size() ? loads[i].nominal.power : 0.0;
        const double candidates[] = {p.inductance / (p.resistance + p.k_p),
                                     4.0 * p.capacitance * power / (p.i_max * p.i_max), (p.resistance + p.k_p) / p.k_i};
        for (double c : candidates) {
            if (c > 0.0 && c < rep.node_min) {
                rep.node_min = c;
                rep.limiting_node = i;
            }
        }
    }
    rep.edge_max = 0.0;
    for (const auto& e : topology.edges()) rep.edge_max = std::max(rep.edge_max, e.inductance / e.resistance);
    rep.ratio = rep.edge_max > 0.0 ? rep.node_min / rep.edge_max : std::numeric_limits<double>::infinity();
    rep.pass = rep.ratio >= threshold;
    return rep;
}

}  // namespace dcgrid
