#pragma once

#include <span>
#include <vector>

#include "dcgrid/network.hpp"

namespace dcgrid::analysis {

/// Generalised eigenpairs of (L, C) sorted ascending; columns satisfy xi_i^T C xi_j = delta_ij.
struct PencilSpectrum {
    Vector eigenvalues;
    Matrix eigenvectors;

    std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
    /// Number of eigenvalues within the zero tolerance (1e-10 of the largest).
    std::size_t kernel_dimension() const;
};

PencilSpectrum pencil_eigs(const Vector& capacitance, const Matrix& lap);

/// Euclidean distance from v to span{1}.
double kernel_distance(const Vector& v);

/// Spectral norm of the non-kernel eigenvectors with their component means removed.
double deviation_gain(const PencilSpectrum& spectrum);

/// Asymptotic radius of the attractive neighbourhood of ker L for inputs bounded by b_u.
/// Each mode contributes |xi_i| / lambda_i, so the bound stays in volts for any C.
double eta_bound(const PencilSpectrum& spectrum, double b_u);

/// Bound on kernel_distance(v(t)) for trajectories starting in ker L.
double transient_bound(const PencilSpectrum& spectrum, double b_u, double t);

/// Storage S(v) - S(v_eq) - grad S(v_eq) (v - v_eq) with S = v^T C v / 2.
double bergman(const Vector& v, const Vector& v_eq, const Vector& capacitance);

struct EquilibriumOptions {
    double v_ref = 0.0;          // seeds the multi-start set {1, 0.5, 1.2} * v_ref
    double v_lower = 0.0;        // band used for the in-bounds flag
    double v_upper = 0.0;
    double v_cutoff = 1e-9;      // constant-power singularity guard
    int max_iterations = 100;
    double tolerance = 1e-10;    // residual relative to max(1, |injections|)
};

struct EquilibriumRoot {
    Vector v;
    double residual = 0.0;
    int iterations = 0;
    bool in_band = false;
};

struct EquilibriumResult {
    Vector v;                  // root closest to v_ref * 1
    Vector line_currents;      // diag(1/r_e) B v, empty without a topology
    double residual = 0.0;
    int iterations = 0;
    bool in_band = false;
    bool kernel_direction = false;   // Jacobian singular: v is only fixed up to span{1}
    bool multiple = false;           // more than one distinct root found
    std::vector<EquilibriumRoot> roots;
};

/// Solves g(v) d + L v = injections by damped Newton from a fixed multi-start set.
EquilibriumResult network_equilibrium(const Matrix& lap, std::span<const ZipLoad> loads, const Vector& injections,
                                      const EquilibriumOptions& options);

EquilibriumResult network_equilibrium(const NetworkTopology& topology, std::span<const ZipLoad> loads,
                                      const Vector& injections, const EquilibriumOptions& options);

Vector line_currents(const NetworkTopology& topology, const Vector& v);

struct RampTrace {
    std::vector<double> time;
    std::vector<Vector> v;
    std::vector<double> mean;
    std::vector<double> kernel_distance;
    double slope = 0.0;                 // mean-voltage slope over the final 10% of the run [V/s]
    double predicted_slope = 0.0;       // (sum u - sum d) / 1^T C 1
};

/// Integrates C dv/dt = -L v - d + u from v0 with RK4.
RampTrace ramp_experiment(const Vector& capacitance, const Matrix& lap, const Vector& load, const Vector& injection,
                          const Vector& v0, double t_end, double h);

}  // namespace dcgrid::analysis
