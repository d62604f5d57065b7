#include "dcgrid/laplacian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dcgrid/error.hpp"
#include "dcgrid/integrator.hpp"

namespace dcgrid::analysis {

namespace {

double zero_tolerance(const Vector& eigenvalues) {
    const double scale = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
    return 1e-10 * std::max(scale, std::numeric_limits<double>::min());
}

}  // namespace

std::size_t PencilSpectrum::kernel_dimension() const {
    const double tol = zero_tolerance(eigenvalues);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        if (std::abs(eigenvalues(i)) <= tol) ++k;
    }
    return k;
}

PencilSpectrum pencil_eigs(const Vector& capacitance, const Matrix& lap) {
    const auto n = lap.rows();
    if (lap.cols() != n || capacitance.size() != n) fail(ErrorKind::Config, "pencil dimensions do not match");
    if ((capacitance.array() <= 0.0).any()) fail(ErrorKind::Parameter, "capacitances must be positive");
    const double norm = lap.cwiseAbs().maxCoeff();
    if ((lap - lap.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(norm, 1.0)) {
        fail(ErrorKind::Numerical, "Laplacian is not symmetric");
    }
    PencilSpectrum out;
    if (norm == 0.0) {
        out.eigenvalues = Vector::Zero(n);
        out.eigenvectors = capacitance.cwiseSqrt().cwiseInverse().asDiagonal();
        return out;
    }
    const Matrix c = capacitance.asDiagonal();
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(lap, c);
    if (solver.info() != Eigen::Success) fail(ErrorKind::Numerical, "generalised eigensolver failed");
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
    const double tol = zero_tolerance(out.eigenvalues);
    if (out.eigenvalues(0) < -tol) {
        std::ostringstream msg;
        msg << "Laplacian pencil has a negative eigenvalue " << out.eigenvalues(0) << "; matrix is not PSD";
        fail(ErrorKind::Numerical, msg.str());
    }
    // Deterministic sign: largest-magnitude component positive.
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Index idx = 0;
        out.eigenvectors.col(j).cwiseAbs().maxCoeff(&idx);
        if (out.eigenvectors(idx, j) < 0.0) out.eigenvectors.col(j) *= -1.0;
    }
    return out;
}

double kernel_distance(const Vector& v) {
    if (v.size() == 0) return 0.0;
    return (v.array() - v.mean()).matrix().norm();
}

double deviation_gain(const PencilSpectrum& spectrum) {
    const auto n = static_cast<Eigen::Index>(spectrum.size());
    if (n <= 1) return 0.0;
    Matrix dev = spectrum.eigenvectors.rightCols(n - 1);
    for (Eigen::Index j = 0; j < dev.cols(); ++j) dev.col(j).array() -= dev.col(j).mean();
    Eigen::JacobiSVD<Matrix> svd(dev);
    return svd.singularValues()(0);
}

namespace {

void require_single_kernel(const PencilSpectrum& spectrum) {
    const auto k = spectrum.kernel_dimension();
    if (spectrum.size() > 1 && k != 1) {
        fail(ErrorKind::Config, "pencil has " + std::to_string(k) +
                                    " zero eigenvalues; the graph is disconnected and the bound is infinite");
    }
}

template <class Weight>
double modal_sum(const PencilSpectrum& spectrum, Weight&& weight) {
    double sum = 0.0;
    for (Eigen::Index i = 1; i < spectrum.eigenvalues.size(); ++i) {
        const double lambda = spectrum.eigenvalues(i);
        sum += spectrum.eigenvectors.col(i).norm() * weight(lambda);
    }
    return sum;
}

}  // namespace

double eta_bound(const PencilSpectrum& spectrum, double b_u) {
    if (b_u < 0.0) fail(ErrorKind::Domain, "input bound must be non-negative");
    require_single_kernel(spectrum);
    if (b_u == 0.0) return 0.0;
    return b_u * deviation_gain(spectrum) * modal_sum(spectrum, [](double l) { return 1.0 / l; });
}

double transient_bound(const PencilSpectrum& spectrum, double b_u, double t) {
    if (b_u < 0.0) fail(ErrorKind::Domain, "input bound must be non-negative");
    if (t < 0.0) fail(ErrorKind::Domain, "time must be non-negative");
    require_single_kernel(spectrum);
    if (b_u == 0.0) return 0.0;
    return b_u * deviation_gain(spectrum) *
           modal_sum(spectrum, [t](double l) { return -std::expm1(-l * t) / l; });
}

double bergman(const Vector& v, const Vector& v_eq, const Vector& capacitance) {
    auto storage = [&](const Vector& x) { return 0.5 * x.dot(capacitance.cwiseProduct(x)); };
    const Vector grad = capacitance.cwiseProduct(v_eq);
    return storage(v) - storage(v_eq) - grad.dot(v - v_eq);
}

Vector line_currents(const NetworkTopology& topology, const Vector& v) {
    return line_conductances(topology).cwiseProduct(build_incidence(topology) * v);
}

namespace {

struct NewtonRun {
    Vector v;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

NewtonRun newton(const Matrix& lap, std::span<const ZipLoad> loads, const Vector& inj, Vector v,
                 const EquilibriumOptions& opt) {
    const auto n = lap.rows();
    const double scale = std::max(1.0, inj.norm());
    auto residual = [&](const Vector& x, Vector& r) {
        r = lap * x - inj;
        for (Eigen::Index i = 0; i < n; ++i) r(i) += zip_current(loads[static_cast<std::size_t>(i)], x(i), opt.v_cutoff);
    };
    NewtonRun run;
    Vector r(n);
    try {
        residual(v, r);
    } catch (const Error&) {
        run.v = v;
        return run;
    }
    run.history.push_back(r.norm());
    for (int it = 0; it <= opt.max_iterations; ++it) {
        run.iterations = it;
        if (r.norm() <= opt.tolerance * scale) {
            run.converged = true;
            break;
        }
        if (it == opt.max_iterations) break;
        Matrix jac = lap;
        for (Eigen::Index i = 0; i < n; ++i) {
            jac(i, i) += zip_current_slope(loads[static_cast<std::size_t>(i)], v(i), opt.v_cutoff);
        }
        const Vector step = -jac.completeOrthogonalDecomposition().solve(r);
        // Keep constant-power nodes away from the singularity.
        double alpha = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (loads[static_cast<std::size_t>(i)].power != 0.0 && step(i) < 0.0) {
                alpha = std::min(alpha, 0.5 * (v(i) - opt.v_cutoff) / -step(i));
            }
        }
        Vector trial(n), r_trial(n);
        bool accepted = false;
        for (int k = 0; k < 40; ++k) {
            trial = v + alpha * step;
            try {
                residual(trial, r_trial);
                if (r_trial.norm() < r.norm() || r_trial.norm() <= opt.tolerance * scale) {
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        v = trial;
        r = r_trial;
        run.history.push_back(r.norm());
    }
    run.v = v;
    run.residual = r.norm();
    return run;
}

}  // namespace

EquilibriumResult network_equilibrium(const Matrix& lap, std::span<const ZipLoad> loads, const Vector& injections,
                                      const EquilibriumOptions& options) {
    const auto n = lap.rows();
    if (static_cast<Eigen::Index>(loads.size()) != n || injections.size() != n) {
        fail(ErrorKind::Config, "equilibrium problem dimensions do not match");
    }
    if (!injections.allFinite()) fail(ErrorKind::Domain, "injections must be finite");
    const double starts[] = {1.0, 0.5, 1.2};
    EquilibriumResult result;
    std::ostringstream history;
    for (double factor : starts) {
        NewtonRun run = newton(lap, loads, injections, Vector::Constant(n, factor * options.v_ref), options);
        history << " start " << factor << "*v_ref: " << run.iterations << " iterations, residual " << run.residual
                << ";";
        if (!run.converged) continue;
        bool duplicate = false;
        for (const auto& root : result.roots) {
            if ((root.v - run.v).norm() <= 1e-6 * (1.0 + run.v.norm())) duplicate = true;
        }
        if (duplicate) continue;
        EquilibriumRoot root;
        root.v = run.v;
        root.residual = run.residual;
        root.iterations = run.iterations;
        root.in_band = (run.v.array() >= options.v_lower).all() && (run.v.array() <= options.v_upper).all();
        result.roots.push_back(std::move(root));
    }
    if (result.roots.empty()) {
        fail(ErrorKind::EquilibriumNotFound, "Newton did not converge from any start:" + history.str());
    }
    const Vector target = Vector::Constant(n, options.v_ref);
    auto best = std::min_element(result.roots.begin(), result.roots.end(), [&](const auto& a, const auto& b) {
        return (a.v - target).norm() < (b.v - target).norm();
    });
    result.v = best->v;
    result.residual = best->residual;
    result.iterations = best->iterations;
    result.in_band = best->in_band;
    result.multiple = result.roots.size() > 1;
    Matrix jac = lap;
    for (Eigen::Index i = 0; i < n; ++i) {
        jac(i, i) += zip_current_slope(loads[static_cast<std::size_t>(i)], result.v(i), options.v_cutoff);
    }
    Eigen::FullPivLU<Matrix> lu(jac);
    lu.setThreshold(1e-10);
    result.kernel_direction = lu.rank() < n;
    return result;
}

EquilibriumResult network_equilibrium(const NetworkTopology& topology, std::span<const ZipLoad> loads,
                                      const Vector& injections, const EquilibriumOptions& options) {
    auto result = network_equilibrium(laplacian(topology), loads, injections, options);
    result.line_currents = line_currents(topology, result.v);
    return result;
}

RampTrace ramp_experiment(const Vector& capacitance, const Matrix& lap, const Vector& load, const Vector& injection,
                          const Vector& v0, double t_end, double h) {
    RampTrace trace;
    const Vector net = injection - load;
    auto rhs = [&](double, const Vector& v) -> Vector { return (net - lap * v).cwiseQuotient(capacitance); };
    auto record = [&](double t, const Vector& v) {
        trace.time.push_back(t);
        trace.v.push_back(v);
        trace.mean.push_back(v.mean());
        trace.kernel_distance.push_back(kernel_distance(v));
    };
    record(0.0, v0);
    integrate_interval(v0, rhs, 0.0, t_end, h, record);
    const std::size_t last = trace.time.size() - 1;
    std::size_t first = static_cast<std::size_t>(0.9 * static_cast<double>(last));
    if (first == last && last > 0) first = last - 1;
    if (last > 0) {
        trace.slope = (trace.mean[last] - trace.mean[first]) / (trace.time[last] - trace.time[first]);
    }
    trace.predicted_slope = net.sum() / capacitance.sum();
    return trace;
}

}  // namespace dcgrid::analysis
