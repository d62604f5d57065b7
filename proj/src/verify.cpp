#include "dcgrid/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dcgrid/error.hpp"
#include "dcgrid/integrator.hpp"
#include "dcgrid/laplacian.hpp"
#include "dcgrid/mpc.hpp"
#include "dcgrid/primary.hpp"

namespace dcgrid::verify {

namespace {

constexpr std::size_t kMaxFailures = 20;

ConverterParams reference_converter() {
    ConverterParams p;
    p.inductance = 1.8e-3;
    p.resistance = 0.2;
    p.capacitance = 20e-3;
    p.v_in = 800.0;
    p.i_max = 178.7;
    p.k_p = 2.0;
    p.k_i = 500.0;
    p.v_lower = 240.0;
    p.v_upper = 800.0;
    return p;
}

struct Builder {
    SuiteReport report;
    explicit Builder(std::string name) { report.suite = std::move(name); }
    void check(const std::string& name, bool pass, const std::string& detail) {
        report.checks.push_back({name, pass, detail});
    }
    void failure(const std::string& what) {
        if (report.failures.size() < kMaxFailures) report.failures.push_back(what);
    }
    SuiteReport done() {
        report.passed = std::all_of(report.checks.begin(), report.checks.end(), [](const Check& c) { return c.pass; });
        return std::move(report);
    }
};

using Pair = Eigen::Vector2d;

Pair primary_vec(const primary::State& s) { return {s.i_tilde, s.sigma}; }

Pair primary_field(const Pair& x, double u, const ConverterParams& p) {
    const auto d = primary::rhs({x(0), x(1)}, u, p);
    return {d.di_tilde, d.dsigma};
}

Pair rk4(const Pair& x, double u, const ConverterParams& p, double h) {
    const Pair k1 = primary_field(x, u, p);
    const Pair k2 = primary_field(x + 0.5 * h * k1, u, p);
    const Pair k3 = primary_field(x + 0.5 * h * k2, u, p);
    const Pair k4 = primary_field(x + h * k3, u, p);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SuiteReport primary_invariance(std::uint64_t seed) {
    Builder b("primary-invariance");
    const auto p = reference_converter();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double half = p.input_bound();
    const double slack = 1e-9 * p.i_max;
    const double h = 1e-5;
    std::size_t trajectories = 0, excursions = 0;
    for (int init = 0; init < 100; ++init) {
        const Pair x0(half * unit(rng), 0.999 * primary::kHalfPi * unit(rng));
        for (int k = 0; k < 10; ++k) {
            const double u = half * unit(rng);
            Pair x = x0;
            ++trajectories;
            for (int step = 0; step < 5000; ++step) {
                x = rk4(x, u, p, h);
                if (std::abs(x(0)) > half + slack || std::abs(x(1)) > primary::kHalfPi + 1e-12) {
                    ++excursions;
                    std::ostringstream msg;
                    msg << "init " << init << " u " << u << " left Z at t = " << (step + 1) * h;
                    b.failure(msg.str());
                    break;
                }
            }
        }
    }
    b.check("trajectories stay in Z", excursions == 0,
            std::to_string(excursions) + " excursions in " + std::to_string(trajectories) + " trajectories");
    return b.done();
}

SuiteReport lyapunov(std::uint64_t seed) {
    Builder b("lyapunov");
    const auto p = reference_converter();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double half = p.input_bound();
    const double scale = p.authority() * p.authority() / p.k_i;

    // Grid minimum and stationarity at the equilibrium.
    int grid_failures = 0, gradient_failures = 0;
    double worst_gradient = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double u = 0.95 * half * unit(rng);
        const auto eq = primary::equilibrium(u, p);
        const double w_eq = primary::lyapunov(eq, u, p);
        double grid_min = std::numeric_limits<double>::infinity();
        for (int a = 1; a <= 201; ++a) {
            for (int c = 1; c <= 201; ++c) {
                const primary::State s{-half + 2.0 * half * a / 202.0, -primary::kHalfPi + std::numbers::pi * c / 202.0};
                grid_min = std::min(grid_min, primary::lyapunov(s, u, p));
            }
        }
        if (grid_min < w_eq - 1e-12 * std::abs(w_eq)) {
            ++grid_failures;
            b.failure("grid point below W(eq) for u = " + std::to_string(u));
        }
        const double ei = 1e-5 * half, es = 1e-5;
        const double gi = (primary::lyapunov({eq.i_tilde + ei, eq.sigma}, u, p) -
                           primary::lyapunov({eq.i_tilde - ei, eq.sigma}, u, p)) / (2.0 * ei) * half / scale;
        const double gs = (primary::lyapunov({eq.i_tilde, eq.sigma + es}, u, p) -
                           primary::lyapunov({eq.i_tilde, eq.sigma - es}, u, p)) / (2.0 * es) / scale;
        worst_gradient = std::max({worst_gradient, std::abs(gi), std::abs(gs)});
        if (std::abs(gi) > 1e-9 || std::abs(gs) > 1e-9) ++gradient_failures;
    }
    b.check("unique grid minimiser at the equilibrium", grid_failures == 0,
            std::to_string(grid_failures) + " of 20 inputs with a lower grid value");
    {
        std::ostringstream msg;
        msg << "max normalised partial " << worst_gradient;
        b.check("gradient vanishes at the equilibrium", gradient_failures == 0, msg.str());
    }

    // Decrease along trajectories and convergence.
    const double h = 1e-5;
    const double ball = 1e-4 * p.i_max;
    const double gamma = 0.5;
    const double slack = 1e-6 * scale;
    int decrease_failures = 0, converge_failures = 0;
    for (int k = 0; k < 100; ++k) {
        const double u = 0.9 * half * unit(rng);
        const auto eq = primary::equilibrium(u, p);
        Pair x(half * unit(rng), 0.9 * primary::kHalfPi * unit(rng));
        double w = primary::lyapunov({x(0), x(1)}, u, p);
        bool converged = false;
        for (int step = 0; step < 200000; ++step) {
            const Pair next = rk4(x, u, p, h);
            const double w_next = primary::lyapunov({next(0), next(1)}, u, p);
            const double dist = std::abs(x(0) - eq.i_tilde) + std::abs(x(1) - eq.sigma);
            if (dist > ball) {
                const double e0 = x(0) - u, e1 = next(0) - u;
                const double rate = (w_next - w) / h;
                // Integral of the squared tracking error over the step, e linear in t.
                const double mean_sq = (e0 * e0 + e0 * e1 + e1 * e1) / 3.0;
                const double bound = -gamma * (p.resistance + p.k_p) * mean_sq + slack;
                if (rate > bound || !(w_next < w + 1e-13 * std::abs(w))) {
                    ++decrease_failures;
                    std::ostringstream msg;
                    msg << "u " << u << " t " << step * h << " rate " << rate << " bound " << bound;
                    b.failure(msg.str());
                    break;
                }
            } else {
                converged = true;
                break;
            }
            x = next;
            w = w_next;
        }
        if (!converged) {
            ++converge_failures;
            b.failure("trajectory for u = " + std::to_string(u) + " did not reach the 1e-4 I_max ball in 2 s");
        }
    }
    b.check("decrease outside the 1e-4 I_max ball", decrease_failures == 0,
            std::to_string(decrease_failures) + " of 100 trajectories");
    b.check("convergence to equilibrium(u)", converge_failures == 0,
            std::to_string(converge_failures) + " of 100 trajectories");

    // Positive definite Hessian.
    int hessian_failures = 0;
    double min_eig = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1000; ++k) {
        const double u = 0.95 * half * unit(rng);
        const double i0 = 0.95 * half * unit(rng), s0 = 0.95 * primary::kHalfPi * unit(rng);
        const double di = 1e-2, ds = 1e-4;
        auto W = [&](double i, double s) { return primary::lyapunov({i, s}, u, p); };
        Eigen::Matrix2d hess;
        hess(0, 0) = (W(i0 + di, s0) - 2.0 * W(i0, s0) + W(i0 - di, s0)) / (di * di);
        hess(1, 1) = (W(i0, s0 + ds) - 2.0 * W(i0, s0) + W(i0, s0 - ds)) / (ds * ds);
        hess(0, 1) = hess(1, 0) =
            (W(i0 + di, s0 + ds) - W(i0 + di, s0 - ds) - W(i0 - di, s0 + ds) + W(i0 - di, s0 - ds)) / (4.0 * di * ds);
        const double e = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(hess).eigenvalues().minCoeff();
        min_eig = std::min(min_eig, e);
        if (!(e > 0.0)) ++hessian_failures;
    }
    {
        std::ostringstream msg;
        msg << hessian_failures << " of 1000 points; min eigenvalue " << min_eig;
        b.check("Hessian positive definite", hessian_failures == 0, msg.str());
    }
    return b.done();
}

SuiteReport kernel_bound(std::uint64_t seed) {
    Builder b("kernel-bound");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (int run = 0; run < 1000; ++run) {
        const auto n = static_cast<std::size_t>(2 + static_cast<int>(unit(rng) * 7.0));
        std::vector<Edge> edges;
        NetworkTopology topo;
        do {
            edges.clear();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (unit(rng) < 0.5) edges.push_back({i, j, 0.5 + 1.5 * unit(rng), 0.0});
                }
            }
            topo = NetworkTopology(n, edges);
        } while (!topo.is_connected());
        const auto nn = static_cast<Eigen::Index>(n);
        Vector cap(nn);
        for (Eigen::Index i = 0; i < nn; ++i) cap(i) = 5e-3 + 15e-3 * unit(rng);
        const Matrix lap = laplacian(topo);
        const auto spectrum = analysis::pencil_eigs(cap, lap);
        const double b_u = 1.0 + 49.0 * unit(rng);
        Vector v = Vector::Constant(nn, 500.0 * unit(rng));
        Vector u(nn);
        double t = 0.0;
        for (int piece = 0; piece < 20; ++piece) {
            Vector dir(nn);
            for (Eigen::Index i = 0; i < nn; ++i) dir(i) = std::normal_distribution<double>(0.0, 1.0)(rng);
            u = dir.normalized() * b_u * std::cbrt(unit(rng));
            auto f = [&](double, const Vector& x) -> Vector { return (u - lap * x).cwiseQuotient(cap); };
            v = integrate_interval(v, f, t, t + 1e-3, 1e-5, [&](double time, const Vector& x) {
                const double margin = analysis::kernel_distance(x) -
                                      (analysis::transient_bound(spectrum, b_u, time) + 1e-6 * b_u);
                worst = std::max(worst, margin);
                if (margin > 0.0) {
                    ++violations;
                    b.failure("run " + std::to_string(run) + " at t = " + std::to_string(time));
                }
            });
            t += 1e-3;
        }
    }
    std::ostringstream msg;
    msg << violations << " violating samples over 1000 runs; max(distance - bound) " << worst << " V";
    b.check("kernel distance below the transient bound", violations == 0, msg.str());
    return b.done();
}

SuiteReport kkt(std::uint64_t seed) {
    Builder b("kkt");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int instances = 0, exact_failures = 0, grid_failures = 0;
    double worst_grid = 0.0;
    while (instances < 500) {
        mpc::NodeModel m;
        m.params = reference_converter();
        m.params.i_max = 100.0 + 150.0 * unit(rng);
        m.self_conductance = 5.0 * unit(rng);
        m.load = {0.05 * unit(rng), 20.0 * unit(rng), 40000.0 * unit(rng)};
        m.v_cutoff = 40.0;
        m.v_ref = 560.0;
        const double w = -m.self_conductance * (560.0 + 20.0 * (unit(rng) - 0.5));
        const auto ss = mpc::steady_state_solve(m, w);
        if (!ss.interior) continue;
        ++instances;
        if (ss.v != m.v_ref) {
            ++exact_failures;
            b.failure("instance " + std::to_string(instances) + ": v_ss != v*");
        }
        double best = std::numeric_limits<double>::quiet_NaN();
        for (int k = 0; k <= 56000; ++k) {
            const double v = 240.0 + 0.01 * k;
            const double u = m.self_conductance * v + zip_current(m.load, v, m.v_cutoff) + w - m.params.i_shift();
            if (std::abs(u) <= m.params.input_bound() && (std::isnan(best) || std::abs(v - 560.0) < std::abs(best - 560.0))) {
                best = v;
            }
        }
        const double gap = std::isnan(best) ? std::numeric_limits<double>::infinity() : std::abs(best - ss.v);
        worst_grid = std::max(worst_grid, gap);
        if (gap > 0.005 + 1e-9) {
            ++grid_failures;
            b.failure("instance " + std::to_string(instances) + ": grid minimiser differs by " + std::to_string(gap));
        }
    }
    b.check("interior input gives v_ss = v*", exact_failures == 0, std::to_string(exact_failures) + " of 500");
    std::ostringstream msg;
    msg << grid_failures << " of 500; max gap " << worst_grid << " V";
    b.check("matches the 0.01 V grid minimiser", grid_failures == 0, msg.str());
    return b.done();
}

mpc::NodeModel reference_node() {
    mpc::NodeModel m;
    m.params = reference_converter();
    m.self_conductance = 3.0;
    m.load = ZipLoad::constant_power(0.95 * 43000.0);
    m.v_cutoff = 40.0;
    m.v_ref = 560.0;
    return m;
}

SuiteReport terminal(std::uint64_t seed) {
    Builder b("terminal");
    const auto m = reference_node();
    const double w = -3.0 * 560.0;
    const mpc::OcpSpec spec;
    const auto problem = mpc::make_problem(m, w, spec);
    const auto& x_eq = problem.equilibrium.x;
    const double u_fixed = mpc::terminal_control(m, x_eq, x_eq, problem.equilibrium.u, w, problem.terminal, spec);
    b.check("equilibrium maps to u_eq", u_fixed == problem.equilibrium.u, "u = " + std::to_string(u_fixed));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    int escapes = 0, empty = 0;
    for (int k = 0; k < 100; ++k) {
        mpc::State x = x_eq;
        for (int c = 0; c < 3; ++c) {
            const double r = unit(rng);
            x(c) += r * (r >= 0.0 ? problem.terminal.offsets(2 * c) : problem.terminal.offsets(2 * c + 1));
        }
        try {
            for (int step = 0; step < 50; ++step) {
                const double u = mpc::terminal_control(m, x, x_eq, problem.equilibrium.u, w, problem.terminal, spec);
                x = mpc::transition(m, x, u, w, spec).next;
                if (mpc::gauge(x, x_eq, problem.terminal) > 1.0 + 1e-9) {
                    ++escapes;
                    b.failure("state " + std::to_string(k) + " left the terminal set at step " + std::to_string(step));
                    break;
                }
            }
        } catch (const Error& e) {
            ++empty;
            b.failure("state " + std::to_string(k) + ": " + e.what());
        }
    }
    b.check("terminal set invariant for 50 steps", escapes == 0 && empty == 0,
            std::to_string(escapes) + " escapes, " + std::to_string(empty) + " empty input sets over 100 states");
    return b.done();
}

SuiteReport value_decrease(std::uint64_t) {
    Builder b("value-decrease");
    const auto m = reference_node();
    const double w = -3.0 * 560.0;
    const mpc::OcpSpec spec;
    auto problem = mpc::make_problem(m, w, spec);
    problem.terminal_weight = mpc::calibrate_terminal_weight(problem).weight;
    const auto at_eq = mpc::solve_ocp(problem, problem.equilibrium.x, {});
    b.check("zero value at the equilibrium", at_eq.value == 0.0 && at_eq.inputs[0] == problem.equilibrium.u,
            "value " + std::to_string(at_eq.value));
    mpc::State x(540.0, 0.0, 0.0);
    std::vector<double> warm;
    int failures = 0, warm_failures = 0;
    double previous = std::numeric_limits<double>::quiet_NaN();
    double previous_stage = 0.0;
    for (int k = 0; k < 40; ++k) {
        const auto sol = mpc::solve_ocp(problem, x, warm);
        if (!sol.feasible()) {
            ++failures;
            b.failure("sample " + std::to_string(k) + " infeasible");
            break;
        }
        if (k > 0) {
            if (!sol.warm_start_feasible) ++warm_failures;
            if (sol.value - previous > -previous_stage + 1e-6) {
                ++failures;
                b.failure("sample " + std::to_string(k) + ": value " + std::to_string(sol.value) + " after " +
                          std::to_string(previous));
            }
        }
        previous = sol.value;
        previous_stage = spec.sample * mpc::stage_cost(problem, x, sol.inputs[0]);
        x = sol.states[1];
        warm = mpc::shifted_warm_start(problem, x, sol.inputs);
    }
    b.check("value decreases by at least delta * stage cost", failures == 0,
            std::to_string(failures) + " failing samples of 40 from v = 540 V");
    b.check("shifted warm start feasible", warm_failures == 0, std::to_string(warm_failures) + " infeasible");
    return b.done();
}

const std::vector<std::pair<std::string, std::function<SuiteReport(std::uint64_t)>>>& registry() {
    static const std::vector<std::pair<std::string, std::function<SuiteReport(std::uint64_t)>>> suites = {
        {"primary-invariance", primary_invariance},
        {"lyapunov", lyapunov},
        {"kernel-bound", kernel_bound},
        {"kkt", kkt},
        {"terminal", terminal},
        {"value-decrease", value_decrease},
    };
    return suites;
}

}  // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, fn] : registry()) out.push_back(name);
        out.push_back("all");
        return out;
    }();
    return names;
}

std::vector<SuiteReport> run_suite(const std::string& name, std::uint64_t seed) {
    std::vector<SuiteReport> out;
    for (const auto& [suite, fn] : registry()) {
        if (name == "all" || name == suite) out.push_back(fn(seed));
    }
    if (out.empty()) fail(ErrorKind::Config, "unknown verification suite '" + name + "'");
    return out;
}

std::string to_json(const std::vector<SuiteReport>& reports) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json checks = nlohmann::json::array();
        for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        doc.push_back({{"suite", r.suite}, {"passed", r.passed}, {"checks", checks}, {"failures", r.failures}});
    }
    return doc.dump(2);
}

}  // namespace dcgrid::verify
