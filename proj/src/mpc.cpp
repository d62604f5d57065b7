#include "dcgrid/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dcgrid/error.hpp"
#include "dcgrid/primary.hpp"
#include "dcgrid/qp.hpp"

namespace dcgrid::mpc {

const char* to_string(OcpStatus status) noexcept {
    switch (status) {
        case OcpStatus::Converged: return "converged";
        case OcpStatus::MaxIterations: return "max-iterations";
        case OcpStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

void OcpSpec::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) fail(ErrorKind::Parameter, std::string("invalid controller setting: ") + what);
    };
    require(steps >= 1, "steps must be >= 1");
    require(sample > 0.0, "sample must be positive");
    require(substeps >= 1, "substeps must be >= 1");
    require(voltage_weight >= 0.0 && input_weight >= 0.0, "weights must be non-negative");
    require(contraction >= 0.0 && contraction <= 1.0, "contraction must lie in [0, 1]");
    require(voltage_halfwidth > 0.0, "voltage_halfwidth must be positive");
    require(current_fraction > 0.0 && current_fraction <= 1.0, "current_fraction must lie in (0, 1]");
    require(sigma_halfwidth > 0.0, "sigma_halfwidth must be positive");
    require(terminal_weight >= 0.0, "terminal_weight must be non-negative");
    require(calibration_margin >= 1.0, "calibration_margin must be >= 1");
    require(max_iterations >= 1, "max_iterations must be >= 1");
    require(tolerance > 0.0 && feasibility_tolerance > 0.0, "tolerances must be positive");
}

double model_load_current(const NodeModel& m, double v) {
    const auto& d = m.load;
    const double base = d.conductance * v + d.current;
    if (d.power == 0.0) return base;
    const double vc = m.v_cutoff;
    if (v > vc) return base + d.power / v;
    return base + d.power / vc - d.power / (vc * vc) * (v - vc);
}

double model_load_slope(const NodeModel& m, double v) {
    const auto& d = m.load;
    if (d.power == 0.0) return d.conductance;
    const double vv = std::max(v, m.v_cutoff);
    return d.conductance - d.power / (vv * vv);
}

State node_rhs(const NodeModel& m, const State& x, double u, double w) {
    const auto& p = m.params;
    const double inflow = x(1) + p.i_shift() - m.self_conductance * x(0) - model_load_current(m, x(0)) - w;
    const auto primary = primary::rhs({x(1), x(2)}, u, p);
    return {inflow / p.capacitance, primary.di_tilde, primary.dsigma};
}

namespace {

void rhs_jacobian(const NodeModel& m, const State& x, double u, Eigen::Matrix3d& fx, State& fu) {
    const auto& p = m.params;
    const double a = p.resistance + p.k_p;
    const double big_m = p.authority();
    const double c = std::cos(x(2));
    const double s = std::sin(x(2));
    fx.setZero();
    fx(0, 0) = (-m.self_conductance - model_load_slope(m, x(0))) / p.capacitance;
    fx(0, 1) = 1.0 / p.capacitance;
    fx(1, 1) = -a / p.inductance;
    fx(1, 2) = big_m * c / p.inductance;
    fx(2, 1) = -p.k_i * c / big_m;
    fx(2, 2) = -p.k_i * (u - x(1)) * s / big_m;
    fu = State(0.0, 0.0, p.k_i * c / big_m);
}

}  // namespace

Transition transition(const NodeModel& m, const State& x, double u, double w, const OcpSpec& spec,
                      bool with_jacobian) {
    const double h = spec.sample / spec.substeps;
    Transition out;
    out.next = x;
    out.dx.setIdentity();
    out.du.setZero();
    for (int k = 0; k < spec.substeps; ++k) {
        const State x0 = out.next;
        const State k1 = node_rhs(m, x0, u, w);
        const State x2 = x0 + 0.5 * h * k1;
        const State k2 = node_rhs(m, x2, u, w);
        const State x3 = x0 + 0.5 * h * k2;
        const State k3 = node_rhs(m, x3, u, w);
        const State x4 = x0 + h * k3;
        const State k4 = node_rhs(m, x4, u, w);
        out.next = x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!with_jacobian) continue;
        Eigen::Matrix3d f1, f2, f3, f4;
        State g1, g2, g3, g4;
        rhs_jacobian(m, x0, u, f1, g1);
        rhs_jacobian(m, x2, u, f2, g2);
        rhs_jacobian(m, x3, u, f3, g3);
        rhs_jacobian(m, x4, u, f4, g4);
        const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
        const Eigen::Matrix3d d1 = f1;
        const Eigen::Matrix3d d2 = f2 * (eye + 0.5 * h * d1);
        const Eigen::Matrix3d d3 = f3 * (eye + 0.5 * h * d2);
        const Eigen::Matrix3d d4 = f4 * (eye + h * d3);
        const State e1 = g1;
        const State e2 = f2 * (0.5 * h * e1) + g2;
        const State e3 = f3 * (0.5 * h * e2) + g3;
        const State e4 = f4 * (h * e3) + g4;
        const Eigen::Matrix3d a = eye + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
        const State b = (h / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
        out.dx = a * out.dx;
        out.du = a * out.du + b;
    }
    return out;
}

SteadyState steady_state_solve(const NodeModel& m, double w) {
    const auto& p = m.params;
    const double bound = p.input_bound();
    auto required_input = [&](double v) {
        return m.self_conductance * v + zip_current(m.load, v, m.v_cutoff) + w - p.i_shift();
    };
    const double u_star = required_input(m.v_ref);
    if (std::abs(u_star) < bound) return {m.v_ref, u_star, true};

    const double u = u_star > 0.0 ? bound : -bound;
    const char* binding = u_star > 0.0 ? "upper input bound" : "lower input bound";
    if (std::abs(u_star) == bound) return {m.v_ref, u, false};
    auto residual = [&](double v) { return required_input(v) - u; };
    const double lo = std::max(p.v_lower, m.v_cutoff * (1.0 + 1e-9));
    const double hi = p.v_upper;
    constexpr int kGrid = 2000;
    double best = std::numeric_limits<double>::quiet_NaN();
    double prev_v = lo;
    double prev_r = residual(lo);
    auto consider = [&](double root) {
        if (std::isnan(best) || std::abs(root - m.v_ref) < std::abs(best - m.v_ref)) best = root;
    };
    if (prev_r == 0.0) consider(lo);
    for (int k = 1; k <= kGrid; ++k) {
        const double v = lo + (hi - lo) * k / kGrid;
        const double r = residual(v);
        if (r == 0.0) {
            consider(v);
        } else if ((prev_r < 0.0) != (r < 0.0) && prev_r != 0.0) {
            // Newton safeguarded by the bracket.
            double a = prev_v, b = v, fa = prev_r;
            double x = 0.5 * (a + b);
            for (int it = 0; it < 100; ++it) {
                const double fx = residual(x);
                if (fx == 0.0) break;
                if ((fx < 0.0) == (fa < 0.0)) {
                    a = x;
                    fa = fx;
                } else {
                    b = x;
                }
                const double slope = m.self_conductance + zip_current_slope(m.load, x, m.v_cutoff);
                double next = slope != 0.0 ? x - fx / slope : 0.5 * (a + b);
                if (!(next > a && next < b)) next = 0.5 * (a + b);
                if (std::abs(next - x) <= 1e-13 * std::max(1.0, std::abs(x))) {
                    x = next;
                    break;
                }
                x = next;
            }
            consider(x);
        }
        prev_v = v;
        prev_r = r;
    }
    if (std::isnan(best)) {
        std::ostringstream msg;
        msg << "steady state infeasible: " << binding << " binds (required input " << u_star << " A, bound " << bound
            << " A) and no voltage in [" << lo << ", " << hi << "] V balances the node";
        fail(ErrorKind::Infeasible, msg.str());
    }
    return {best, u, false};
}

LocalEquilibrium local_equilibrium(const NodeModel& m, double w) {
    const auto ss = steady_state_solve(m, w);
    const auto eq = primary::equilibrium(ss.u, m.params);
    return {State(ss.v, eq.i_tilde, eq.sigma), ss.u};
}

Polytope terminal_box(const NodeModel& m, const State& x_eq, const OcpSpec& spec) {
    const auto& p = m.params;
    const double i_half = 0.5 * p.i_max;
    const State width(spec.voltage_halfwidth, spec.current_fraction * i_half, spec.sigma_halfwidth);
    const State upper(p.v_upper, i_half, primary::kHalfPi);
    const State lower(p.v_lower, -i_half, -primary::kHalfPi);
    Polytope box;
    box.normals.setZero(6, 3);
    box.offsets.resize(6);
    for (int k = 0; k < 3; ++k) {
        box.normals(2 * k, k) = 1.0;
        box.offsets(2 * k) = std::min(width(k), upper(k) - x_eq(k));
        box.normals(2 * k + 1, k) = -1.0;
        box.offsets(2 * k + 1) = std::min(width(k), x_eq(k) - lower(k));
    }
    return box;
}

double gauge(const State& x, const State& x_eq, const Polytope& polytope) {
    if ((polytope.offsets.array() <= 0.0).any()) {
        fail(ErrorKind::TerminalSet, "invalid polytope: offsets must be positive (equilibrium on the boundary)");
    }
    const Vector ratios = (polytope.normals * (x - x_eq)).cwiseQuotient(polytope.offsets);
    return std::max(0.0, ratios.maxCoeff());
}

double terminal_control(const NodeModel& m, const State& x, const State& x_eq, double u_eq, double w,
                        const Polytope& polytope, const OcpSpec& spec) {
    const double bound = m.params.input_bound();
    const double target = std::clamp(u_eq, -bound, bound);
    const double limit = spec.contraction * gauge(x, x_eq, polytope) + 1e-9;
    auto admissible = [&](double u) { return gauge(transition(m, x, u, w, spec).next, x_eq, polytope) <= limit; };
    if (admissible(target)) return target;

    constexpr int kGrid = 401;
    double best = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < kGrid; ++k) {
        const double u = -bound + 2.0 * bound * k / (kGrid - 1);
        if ((std::isnan(best) || std::abs(u - target) < std::abs(best - target)) && admissible(u)) best = u;
    }
    if (std::isnan(best)) {
        std::ostringstream msg;
        msg << "terminal law has no admissible input at x = (" << x(0) << ", " << x(1) << ", " << x(2)
            << "), gauge " << gauge(x, x_eq, polytope);
        fail(ErrorKind::TerminalSet, msg.str());
    }
    // Walk from the feasible grid point toward the target.
    const double step = 2.0 * bound / (kGrid - 1);
    double bad = best < target ? std::min(best + step, target) : std::max(best - step, target);
    double good = best;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (good + bad);
        if (admissible(mid)) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    return good;
}

Problem make_problem(const NodeModel& m, double w, const OcpSpec& spec, double terminal_weight) {
    spec.validate();
    Problem problem;
    problem.model = m;
    problem.spec = spec;
    problem.w = w;
    problem.target = steady_state_solve(m, w);
    const auto eq = primary::equilibrium(problem.target.u, m.params);
    problem.equilibrium = {State(problem.target.v, eq.i_tilde, eq.sigma), problem.target.u};
    problem.terminal = terminal_box(m, problem.equilibrium.x, spec);
    problem.terminal_weight = spec.terminal_weight > 0.0 ? spec.terminal_weight : terminal_weight;
    return problem;
}

double stage_cost(const Problem& problem, const State& x, double u) {
    const double dv = x(0) - problem.model.v_ref;
    return problem.spec.voltage_weight * dv * dv + problem.spec.input_weight * std::abs(u - problem.target.u);
}

double terminal_cost(const Problem& problem, const State& x) {
    return problem.terminal_weight * gauge(x, problem.equilibrium.x, problem.terminal);
}

Calibration calibrate_terminal_weight(const Problem& problem) {
    const auto& box = problem.terminal;
    const auto& x_eq = problem.equilibrium.x;
    struct Sample {
        double drop;  // gauge(x) - gauge(x+)
        double cost;  // delta * stage cost
    };
    std::vector<Sample> samples;
    Calibration out;
    const double levels[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
    for (double a : levels) {
        for (double b : levels) {
            for (double c : levels) {
                const double f[] = {a, b, c};
                State x = x_eq;
                for (int k = 0; k < 3; ++k) x(k) += f[k] * (f[k] >= 0.0 ? box.offsets(2 * k) : box.offsets(2 * k + 1));
                ++out.samples;
                try {
                    const double u = terminal_control(problem.model, x, x_eq, problem.equilibrium.u, problem.w, box,
                                                      problem.spec);
                    const State next = transition(problem.model, x, u, problem.w, problem.spec).next;
                    samples.push_back({gauge(x, x_eq, box) - gauge(next, x_eq, box),
                                       problem.spec.sample * stage_cost(problem, x, u)});
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::TerminalSet) throw;
                    ++out.skipped;
                }
            }
        }
    }
    double weight = 1.0;
    constexpr double kCap = 1073741824.0;  // 2^30
    auto holds = [&](double kappa) {
        return std::all_of(samples.begin(), samples.end(),
                           [&](const Sample& s) { return kappa * s.drop >= s.cost - 1e-12; });
    };
    while (!holds(weight) && weight < kCap) weight *= 2.0;
    out.satisfied = holds(weight);
    out.weight = weight * problem.spec.calibration_margin;
    return out;
}

Evaluation evaluate(const Problem& problem, const State& x0, std::span<const double> inputs) {
    const auto& m = problem.model;
    const auto& p = m.params;
    const auto& spec = problem.spec;
    Evaluation out;
    out.states.reserve(inputs.size() + 1);
    out.states.push_back(x0);
    auto note = [&](double v, const std::string& what) {
        if (v > out.violation) {
            out.violation = v;
            out.worst = what;
        }
    };
    const double bound = p.input_bound();
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const State& x = out.states.back();
        out.cost += spec.sample * stage_cost(problem, x, inputs[k]);
        note((std::abs(inputs[k]) - bound) / p.i_max, "input bound at step " + std::to_string(k));
        out.states.push_back(transition(m, x, inputs[k], problem.w, spec).next);
        const State& y = out.states.back();
        const auto knot = " at knot " + std::to_string(k + 1);
        const double band = p.v_upper - p.v_lower;
        note((p.v_lower - y(0)) / band, "lower voltage bound" + knot);
        note((y(0) - p.v_upper) / band, "upper voltage bound" + knot);
        note((std::abs(y(1)) - bound) / p.i_max, "current bound" + knot);
        note((std::abs(y(2)) - primary::kHalfPi) / std::numbers::pi, "integrator bound" + knot);
    }
    const double g = gauge(out.states.back(), problem.equilibrium.x, problem.terminal);
    out.cost += problem.terminal_weight * g;
    note(g - 1.0, "terminal set");
    return out;
}

std::vector<double> shifted_warm_start(const Problem& problem, const State& x0, std::span<const double> previous) {
    const auto n = static_cast<std::size_t>(problem.spec.steps);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t k = 1; k < previous.size() && out.size() + 1 < n; ++k) out.push_back(previous[k]);
    State x = x0;
    for (double u : out) x = transition(problem.model, x, u, problem.w, problem.spec).next;
    while (out.size() < n) {
        double u = problem.equilibrium.u;
        try {
            u = terminal_control(problem.model, x, problem.equilibrium.x, problem.equilibrium.u, problem.w,
                                 problem.terminal, problem.spec);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::TerminalSet) throw;
        }
        out.push_back(u);
        x = transition(problem.model, x, u, problem.w, problem.spec).next;
    }
    return out;
}

namespace {

struct Linearisation {
    std::vector<State> states;
    std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> sens;  // d x_k / d u, k = 0..N
};

Linearisation linearise(const Problem& problem, const State& x0, const std::vector<double>& u) {
    const auto n = static_cast<Eigen::Index>(u.size());
    Linearisation lin;
    lin.states.push_back(x0);
    lin.sens.emplace_back(Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n));
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto t = transition(problem.model, lin.states.back(), u[static_cast<std::size_t>(k)], problem.w,
                                  problem.spec, true);
        Eigen::Matrix<double, 3, Eigen::Dynamic> s = t.dx * lin.sens.back();
        s.col(k) += t.du;
        lin.states.push_back(t.next);
        lin.sens.push_back(std::move(s));
    }
    return lin;
}

}  // namespace

OcpSolution solve_ocp(const Problem& problem, const State& x0, std::span<const double> warm_start) {
    const auto& m = problem.model;
    const auto& p = m.params;
    const auto& spec = problem.spec;
    const int n = spec.steps;
    const double bound = p.input_bound();
    const double delta = spec.sample;

    std::vector<double> u(static_cast<std::size_t>(n), problem.equilibrium.u);
    for (std::size_t k = 0; k < u.size() && k < warm_start.size(); ++k) u[k] = std::clamp(warm_start[k], -bound, bound);

    double rho = 1e4 * (1.0 + problem.terminal_weight);
    auto merit = [&](const Evaluation& e) { return e.cost + rho * e.violation; };

    OcpSolution best;
    best.value = std::numeric_limits<double>::infinity();
    OcpSolution least_violation;
    least_violation.violation = std::numeric_limits<double>::infinity();
    auto offer = [&](const std::vector<double>& inputs, const Evaluation& e) {
        if (e.violation <= spec.feasibility_tolerance) {
            if (e.cost < best.value) {
                best.inputs = inputs;
                best.states = e.states;
                best.value = e.cost;
                best.violation = e.violation;
            }
        } else if (e.violation < least_violation.violation) {
            least_violation.inputs = inputs;
            least_violation.states = e.states;
            least_violation.value = e.cost;
            least_violation.violation = e.violation;
            least_violation.binding = e.worst;
        }
    };

    Evaluation current = evaluate(problem, x0, u);
    offer(u, current);
    const bool warm_feasible = current.violation <= spec.feasibility_tolerance;
    const double warm_cost = current.cost;

    const int nv = 2 * n + 2;  // du, t, s, e
    const int it_t = n, it_s = 2 * n, it_e = 2 * n + 1;
    const auto& box = problem.terminal;
    const int rows = 2 * n + 2 * n + static_cast<int>(box.offsets.size()) + 2 + 6 * n + 1;
    const double sq = std::sqrt(delta * spec.voltage_weight);
    double prox = 1e-6;
    bool converged = false;
    int iterations = 0;
    int penalty_raises = 0;

    for (int it = 0; it < spec.max_iterations; ++it) {
        iterations = it + 1;
        const auto lin = linearise(problem, x0, u);
        // Gauss-Newton residuals of the voltage term at knots 0..N-1.
        Vector r(n);
        Matrix g(n, n);
        for (int k = 0; k < n; ++k) {
            r(k) = sq * (lin.states[static_cast<std::size_t>(k)](0) - m.v_ref);
            g.row(k) = sq * lin.sens[static_cast<std::size_t>(k)].row(0);
        }
        Matrix h = Matrix::Zero(nv, nv);
        Vector c = Vector::Zero(nv);
        const Matrix gtg = g.transpose() * g;
        const double scale = 1.0 + gtg.diagonal().maxCoeff();
        h.topLeftCorner(n, n) = 2.0 * gtg;
        h.topLeftCorner(n, n).diagonal().array() += prox * scale;
        for (int k = n; k < nv; ++k) h(k, k) = 1e-10 * scale;
        c.head(n) = 2.0 * g.transpose() * r;
        c.segment(it_t, n).setConstant(delta * spec.input_weight);
        c(it_s) = problem.terminal_weight;
        c(it_e) = rho;

        Matrix a = Matrix::Zero(rows, nv);
        Vector b = Vector::Zero(rows);
        int row = 0;
        for (int k = 0; k < n; ++k) {
            const double uk = u[static_cast<std::size_t>(k)];
            a(row, k) = 1.0;
            b(row++) = bound - uk;
            a(row, k) = -1.0;
            b(row++) = bound + uk;
            a(row, k) = 1.0;
            a(row, it_t + k) = -1.0;
            b(row++) = problem.target.u - uk;
            a(row, k) = -1.0;
            a(row, it_t + k) = -1.0;
            b(row++) = uk - problem.target.u;
        }
        const State& xn = lin.states.back();
        const auto& sn = lin.sens.back();
        for (Eigen::Index j = 0; j < box.offsets.size(); ++j) {
            const double hj = box.offsets(j);
            a.row(row).head(n) = (box.normals.row(j) * sn) / hj;
            a(row, it_s) = -1.0;
            b(row++) = -box.normals.row(j).dot(xn - problem.equilibrium.x) / hj;
        }
        a(row, it_s) = -1.0;
        b(row++) = 0.0;
        a(row, it_s) = 1.0;
        a(row, it_e) = -1.0;
        b(row++) = 1.0;
        const double band = p.v_upper - p.v_lower;
        const State range(band, p.i_max, std::numbers::pi);
        const State upper(p.v_upper, bound, primary::kHalfPi);
        const State lower(p.v_lower, -bound, -primary::kHalfPi);
        for (int k = 1; k <= n; ++k) {
            const State& xk = lin.states[static_cast<std::size_t>(k)];
            const auto& sk = lin.sens[static_cast<std::size_t>(k)];
            for (int comp = 0; comp < 3; ++comp) {
                a.row(row).head(n) = sk.row(comp) / range(comp);
                a(row, it_e) = -1.0;
                b(row++) = (upper(comp) - xk(comp)) / range(comp);
                a.row(row).head(n) = -sk.row(comp) / range(comp);
                a(row, it_e) = -1.0;
                b(row++) = (xk(comp) - lower(comp)) / range(comp);
            }
        }
        a(row, it_e) = -1.0;
        b(row++) = 0.0;

        const auto sol = qp::solve(h, c, a, b);
        if (sol.status == qp::QpStatus::Numerical) break;
        const Vector du = sol.x.head(n);
        const double phi0 = merit(current);
        const double predicted = phi0 - (r.squaredNorm() + sol.objective);
        if (predicted <= spec.tolerance * (1.0 + std::abs(phi0)) || du.lpNorm<Eigen::Infinity>() <= 1e-9 * bound) {
            if (current.violation <= spec.feasibility_tolerance) {
                converged = true;
                break;
            }
            if (penalty_raises < 3 && sol.x(it_e) > spec.feasibility_tolerance) {
                rho *= 10.0;
                ++penalty_raises;
                continue;
            }
            break;
        }
        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> trial(u.size());
        Evaluation trial_eval;
        for (int ls = 0; ls < 30; ++ls) {
            for (int k = 0; k < n; ++k) {
                trial[static_cast<std::size_t>(k)] =
                    std::clamp(u[static_cast<std::size_t>(k)] + alpha * du(k), -bound, bound);
            }
            trial_eval = evaluate(problem, x0, trial);
            offer(trial, trial_eval);
            if (merit(trial_eval) <= phi0 - 1e-4 * alpha * predicted) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            prox *= 100.0;
            if (prox > 1e8) break;
            continue;
        }
        prox = alpha == 1.0 ? std::max(prox * 0.1, 1e-10) : prox * 10.0;
        u = trial;
        current = std::move(trial_eval);
    }

    OcpSolution out;
    if (std::isfinite(best.value)) {
        out = std::move(best);
        out.status = converged ? OcpStatus::Converged : OcpStatus::MaxIterations;
    } else {
        out = std::move(least_violation);
        out.status = OcpStatus::Infeasible;
    }
    out.iterations = iterations;
    out.warm_start_feasible = warm_feasible;
    out.warm_start_cost = warm_cost;
    return out;
}

}  // namespace dcgrid::mpc
