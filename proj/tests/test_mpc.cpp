#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "common.hpp"
#include "dcgrid/error.hpp"
#include "dcgrid/mpc.hpp"
#include "dcgrid/primary.hpp"

using namespace dcgrid;
using namespace dcgrid::mpc;

namespace {

NodeModel isolated_node() {
    NodeModel m;
    m.params = fixtures::converter();
    m.self_conductance = 0.0;
    m.load = ZipLoad::constant_power(40850.0);
    m.v_cutoff = 40.0;
    m.v_ref = 560.0;
    return m;
}

NodeModel coupled_node() {
    auto m = isolated_node();
    m.self_conductance = 3.0;
    return m;
}

// Scalar power balance g v + P / v = i_s + u - w  solved by bisection on [lo, hi].
double balance_root(const NodeModel& m, double u, double w, double lo, double hi) {
    auto f = [&](double v) {
        return m.self_conductance * v + m.load.power / v + m.load.conductance * v + m.load.current -
               (m.params.i_shift() + u - w);
    };
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((f(lo) < 0) == (f(mid) < 0) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("steady state of the isolated node") {
    const auto m = isolated_node();
    const auto ss = steady_state_solve(m, 0.0);
    CHECK(ss.interior);
    CHECK(ss.v == 560.0);
    CHECK(ss.u == doctest::Approx(40850.0 / 560.0 - 89.35).epsilon(1e-12));
    CHECK(ss.u == doctest::Approx(-16.40).epsilon(1e-3));

    auto empty = m;
    empty.load = {};
    // -i_s sits exactly on the input bound: reference voltage kept, flagged as boundary.
    const auto zero = steady_state_solve(empty, 0.0);
    CHECK_FALSE(zero.interior);
    CHECK(zero.v == 560.0);
    CHECK(zero.u == doctest::Approx(-89.35).epsilon(1e-12));
}

TEST_CASE("steady state with coupling uses the interconnection current") {
    const auto m = coupled_node();
    const double w = -3.0 * 550.0;  // neighbours at 550 V
    const auto ss = steady_state_solve(m, w);
    CHECK(ss.u == doctest::Approx(3.0 * 560.0 + 40850.0 / 560.0 + w - 89.35).epsilon(1e-12));
    CHECK(ss.v == 560.0);
}

TEST_CASE("saturated steady state returns the nearest root") {
    auto m = isolated_node();
    m.load = ZipLoad::constant_power(120000.0);  // needs more than I_max at 560 V
    m.self_conductance = 1.0;
    const double w = -560.0;
    const auto ss = steady_state_solve(m, w);
    CHECK_FALSE(ss.interior);
    CHECK(ss.u == doctest::Approx(m.params.input_bound()));
    const double expect = balance_root(m, ss.u, w, std::sqrt(m.load.power / m.self_conductance), 560.0);
    CHECK(ss.v < 560.0);
    CHECK(ss.v == doctest::Approx(expect).epsilon(1e-9));

    m.load = ZipLoad::constant_power(1e7);
    try {
        steady_state_solve(m, w);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Infeasible);
        CHECK(std::string(e.what()).find("upper") != std::string::npos);
    }
}

TEST_CASE("local equilibrium is a fixed point of the prediction model") {
    const auto m = isolated_node();
    const auto eq = local_equilibrium(m, 0.0);
    CHECK(eq.x(0) == 560.0);
    CHECK(eq.x(1) == doctest::Approx(-16.40).epsilon(1e-3));
    CHECK(eq.x(2) == doctest::Approx(std::asin(2.0 * eq.u / 178.7)).epsilon(1e-14));
    CHECK(eq.x(2) == doctest::Approx(-0.1846).epsilon(1e-3));
    CHECK(node_rhs(m, eq.x, eq.u, 0.0).cwiseAbs().maxCoeff() < 1e-9);

    auto zero = isolated_node();
    zero.load = ZipLoad::constant_power(89.35 * 560.0);
    CHECK(std::abs(local_equilibrium(zero, 0.0).x(2)) < 1e-12);
}

TEST_CASE("voltage row of the prediction model") {
    const auto m = coupled_node();
    const State x(550.0, 10.0, 0.2);
    const double w = -1600.0;
    const State d = node_rhs(m, x, 5.0, w);
    const double expect = (10.0 + 89.35 - 3.0 * 550.0 - 40850.0 / 550.0 - w) / 0.02;
    CHECK(d(0) == doctest::Approx(expect).epsilon(1e-12));
    const auto pr = primary::rhs({10.0, 0.2}, 5.0, m.params);
    CHECK(d(1) == doctest::Approx(pr.di_tilde).epsilon(1e-14));
    CHECK(d(2) == doctest::Approx(pr.dsigma).epsilon(1e-14));
}

TEST_CASE("transition sensitivities match finite differences") {
    const auto m = coupled_node();
    const OcpSpec spec;
    const State x(548.0, -5.0, 0.1);
    const double u = 3.0, w = -1650.0;
    const auto t = transition(m, x, u, w, spec, true);
    for (int j = 0; j < 3; ++j) {
        State e = State::Zero();
        const double h = j == 0 ? 1e-4 : 1e-6;
        e(j) = h;
        const State fd = (transition(m, x + e, u, w, spec).next - transition(m, x - e, u, w, spec).next) / (2 * h);
        CHECK((fd - t.dx.col(j)).norm() <= 1e-5 * (1.0 + t.dx.col(j).norm()));
    }
    const State fdu = (transition(m, x, u + 1e-5, w, spec).next - transition(m, x, u - 1e-5, w, spec).next) / 2e-5;
    CHECK((fdu - t.du).norm() <= 1e-5 * (1.0 + t.du.norm()));
}

TEST_CASE("gauge") {
    Polytope box;
    box.normals.resize(6, 3);
    box.normals << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
    box.offsets.resize(6);
    box.offsets << 10, 10, 89.35, 89.35, 1, 1;
    const State eq(560, -16.4, -0.18);
    CHECK(gauge(eq, eq, box) == 0.0);
    CHECK(gauge(eq + State(5, 0, 0), eq, box) == doctest::Approx(0.5));
    CHECK(gauge(eq + State(0, -89.35, 0), eq, box) == doctest::Approx(1.0));
    CHECK(gauge(eq + State(3, 20, -0.9), eq, box) == doctest::Approx(0.9));
    box.offsets(3) = 0.0;
    try {
        gauge(eq, eq, box);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TerminalSet);
    }
}

TEST_CASE("terminal box lies inside the state constraints") {
    const auto m = coupled_node();
    const OcpSpec spec;
    const auto p = make_problem(m, -1680.0, spec);
    const auto& x_eq = p.equilibrium.x;
    for (int r = 0; r < p.terminal.normals.rows(); ++r) CHECK(p.terminal.offsets(r) > 0.0);
    // Every vertex satisfies the state constraints.
    for (int corner = 0; corner < 8; ++corner) {
        State x = x_eq;
        for (int c = 0; c < 3; ++c) {
            const bool up = corner & (1 << c);
            x(c) += up ? p.terminal.offsets(2 * c) : -p.terminal.offsets(2 * c + 1);
        }
        CHECK(within_constraints(m.params, x(0), x(1), x(2), 1e-9));
        CHECK(gauge(x, x_eq, p.terminal) == doctest::Approx(1.0));
    }
}

TEST_CASE("terminal control") {
    const auto m = coupled_node();
    OcpSpec spec;
    const double w = -1680.0;
    auto p = make_problem(m, w, spec);
    const auto& x_eq = p.equilibrium.x;
    const double u_eq = p.equilibrium.u;
    CHECK(terminal_control(m, x_eq, x_eq, u_eq, w, p.terminal, spec) == u_eq);

    // Oracle: dense input grid at 1e-3 I_max resolution, smallest |u - u_eq| meeting the contraction.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(-0.8, 0.8);
    const double half = m.params.input_bound();
    for (int trial = 0; trial < 20; ++trial) {
        State x = x_eq;
        for (int c = 0; c < 3; ++c) x(c) += unit(rng) * p.terminal.offsets(2 * c);
        const double g0 = gauge(x, x_eq, p.terminal);
        const double u = terminal_control(m, x, x_eq, u_eq, w, p.terminal, spec);
        CHECK(std::abs(u) <= half);
        CHECK(gauge(transition(m, x, u, w, spec).next, x_eq, p.terminal) <= spec.contraction * g0 + 1e-9);
        double best = std::numeric_limits<double>::infinity();
        const double step = 1e-3 * m.params.i_max;
        for (double v = -half; v <= half + 1e-12; v += step) {
            if (gauge(transition(m, x, v, w, spec).next, x_eq, p.terminal) <= spec.contraction * g0 + 1e-9) {
                best = std::min(best, std::abs(v - u_eq));
            }
        }
        CHECK(std::abs(u - u_eq) <= best + 1e-9);
        CHECK(std::abs(u - u_eq) >= best - step);
    }

    // Without contraction the equilibrium input stays optimal when the free successor is interior.
    spec.contraction = 1.0;
    p = make_problem(m, w, spec);
    const State near = x_eq + State(0.5, 0.0, 0.0);
    if (gauge(transition(m, near, u_eq, w, spec).next, x_eq, p.terminal) <= gauge(near, x_eq, p.terminal)) {
        CHECK(terminal_control(m, near, x_eq, u_eq, w, p.terminal, spec) == u_eq);
    }

    // Zero contraction: the successor must land on the equilibrium, which one input cannot do.
    spec.contraction = 0.0;
    p = make_problem(m, w, spec);
    CHECK(terminal_control(m, x_eq, x_eq, u_eq, w, p.terminal, spec) == u_eq);
    try {
        terminal_control(m, x_eq + State(2.0, 5.0, 0.1), x_eq, u_eq, w, p.terminal, spec);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TerminalSet);
    }
}

TEST_CASE("terminal weight calibration") {
    const auto m = coupled_node();
    const OcpSpec spec;
    auto p = make_problem(m, -1680.0, spec);
    const auto cal = calibrate_terminal_weight(p);
    CHECK(cal.satisfied);
    p.terminal_weight = cal.weight;
    // Sampled decrease condition holds with the calibrated weight.
    const auto& x_eq = p.equilibrium.x;
    for (double a : {-0.7, 0.3, 0.9}) {
        for (double b : {-0.6, 0.5}) {
            const State x = x_eq + State(a * 10.0, b * 80.0 * 0.9, 0.4 * a);
            const double u = terminal_control(m, x, x_eq, p.equilibrium.u, p.w, p.terminal, spec);
            const State next = transition(m, x, u, p.w, spec).next;
            CHECK(terminal_cost(p, next) - terminal_cost(p, x) <= -spec.sample * stage_cost(p, x, u) + 1e-9);
        }
    }
}

TEST_CASE("OCP at the equilibrium") {
    const auto m = coupled_node();
    const OcpSpec spec;
    auto p = make_problem(m, -1680.0, spec);
    p.terminal_weight = calibrate_terminal_weight(p).weight;
    const auto sol = solve_ocp(p, p.equilibrium.x, {});
    CHECK(sol.feasible());
    CHECK(sol.value == 0.0);
    for (double u : sol.inputs) CHECK(u == p.equilibrium.u);
}

TEST_CASE("single-step OCP agrees with a brute-force input search") {
    const auto m = coupled_node();
    OcpSpec spec;
    spec.steps = 1;
    const double w = -1680.0;
    auto p = make_problem(m, w, spec);
    p.terminal_weight = calibrate_terminal_weight(p).weight;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    const double half = m.params.input_bound();
    for (int trial = 0; trial < 10; ++trial) {
        State x = p.equilibrium.x;
        x(0) += 4.0 * unit(rng);
        x(1) += 40.0 * unit(rng);
        x(2) += 0.4 * unit(rng);
        const auto sol = solve_ocp(p, x, {});
        REQUIRE(sol.feasible());
        // Oracle: golden-section over feasible inputs on a fine bracket around the grid minimiser.
        auto cost = [&](double u) {
            const std::vector<double> in{u};
            const auto e = evaluate(p, x, in);
            return e.violation > 0.0 ? std::numeric_limits<double>::infinity() : e.cost;
        };
        double best_u = 0.0, best = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 20000; ++k) {
            const double u = -half + 2.0 * half * k / 20000.0;
            if (const double c = cost(u); c < best) {
                best = c;
                best_u = u;
            }
        }
        double lo = best_u - 2.0 * half / 20000.0, hi = best_u + 2.0 * half / 20000.0;
        for (int k = 0; k < 80; ++k) {
            const double a = lo + 0.382 * (hi - lo), b = lo + 0.618 * (hi - lo);
            (cost(a) < cost(b) ? hi : lo) = (cost(a) < cost(b) ? b : a);
        }
        best = std::min(best, cost(0.5 * (lo + hi)));
        CHECK(sol.value <= best + 1e-6 * (1.0 + best));
        CHECK(sol.value >= best - 1e-6 * (1.0 + best));
    }
}

TEST_CASE("value decreases with frozen interconnection") {
    const auto m = coupled_node();
    const OcpSpec spec;
    auto p = make_problem(m, -1680.0, spec);
    p.terminal_weight = calibrate_terminal_weight(p).weight;
    State x(540.0, 0.0, 0.0);
    std::vector<double> warm;
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 25; ++k) {
        const auto sol = solve_ocp(p, x, warm);
        REQUIRE(sol.feasible());
        if (k > 0) CHECK(sol.warm_start_feasible);
        CHECK(sol.value < previous);
        for (double u : sol.inputs) CHECK(std::abs(u) <= m.params.input_bound() + 1e-12);
        for (const auto& s : sol.states) CHECK(within_constraints(m.params, s(0), s(1), s(2), 1e-6));
        previous = sol.value;
        x = sol.states[1];
        warm = shifted_warm_start(p, x, sol.inputs);
    }
    CHECK(std::abs(x(0) - 560.0) < 1.0);
}

TEST_CASE("specification validation") {
    OcpSpec spec;
    spec.steps = 0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = {};
    spec.contraction = 1.5;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = {};
    spec.sample = -1.0;
    CHECK_THROWS_AS(spec.validate(), Error);
}
