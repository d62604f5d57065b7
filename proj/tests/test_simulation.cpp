#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "dcgrid/error.hpp"
#include "dcgrid/integrator.hpp"
#include "dcgrid/io.hpp"
#include "dcgrid/laplacian.hpp"
#include "dcgrid/primary.hpp"
#include "dcgrid/simulation.hpp"

using namespace dcgrid;

namespace {

sim::Scenario two_node() { return io::load_scenario(fixtures::scenario("two_node.json")); }

}  // namespace

TEST_CASE("integrator basics") {
    Vector x(2);
    x << 1.5, -2.0;
    auto zero = [](double, const Vector& s) -> Vector { return Vector::Zero(s.size()); };
    CHECK(integrate_interval(x, zero, 0.0, 1.0, 0.1) == x);

    Vector one(1);
    one << 1.0;
    auto decay = [](double, const Vector& s) -> Vector { return -s; };
    CHECK(std::abs(integrate_interval(one, decay, 0.0, 1.0, 1e-4)(0) - std::exp(-1.0)) < 1e-9);

    // Partial last step lands exactly on t1.
    double last = 0.0;
    integrate_interval(one, decay, 0.0, 0.35, 0.1, [&](double t, const Vector&) { last = t; });
    CHECK(last == 0.35);

    auto blow = [](double, const Vector& s) -> Vector { return s.array().square(); };
    Vector big(1);
    big << 1e200;
    try {
        integrate_interval(big, blow, 0.0, 1.0, 0.5);
        FAIL("no error");
    } catch (const DivergenceError& e) {
        CHECK(e.kind() == ErrorKind::Divergence);
        CHECK(e.last_state()(0) == 1e200);
    }
    CHECK_THROWS_AS(integrate_interval(one, decay, 1.0, 1.0, 0.1), Error);
}

TEST_CASE("primary subsystem converges under a constant input") {
    const auto p = fixtures::converter();
    const double u = 42.0;
    Vector x(2);
    x << -60.0, -1.2;
    auto f = [&](double, const Vector& s) -> Vector {
        const auto d = primary::rhs({s(0), s(1)}, u, p);
        return (Vector(2) << d.di_tilde, d.dsigma).finished();
    };
    x = integrate_interval(x, f, 0.0, 0.5, 1e-5);
    const auto eq = primary::equilibrium(u, p);
    CHECK(std::abs(x(0) - eq.i_tilde) + std::abs(x(1) - eq.sigma) < 1e-4 * p.i_max);
}

TEST_CASE("closed-loop right-hand side vanishes at the network equilibrium") {
    const auto s = two_node();
    const Matrix lap = laplacian(s.topology);
    // Voltages chosen freely; references then follow from the node balance.
    Vector v(2);
    v << 561.0, 557.0;
    NetworkState st;
    st.v = v;
    st.i_tilde.resize(2);
    st.sigma.resize(2);
    Vector refs(2);
    std::vector<ZipLoad> loads;
    for (int i = 0; i < 2; ++i) {
        loads.push_back(s.loads[i].actual);
        const auto& p = s.converters[i];
        const double conv = zip_current(loads[i], v(i), 40.0) + (lap * v)(i);
        const double u = conv - p.i_shift();
        const auto eq = primary::equilibrium(u, p);
        st.i_tilde(i) = eq.i_tilde;
        st.sigma(i) = eq.sigma;
        refs(i) = u + p.i_shift();
    }
    const Vector d = sim::closed_loop_rhs(s, sim::pack(st), refs, loads);
    CHECK(d.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("network term conserves charge") {
    const auto s = io::load_scenario(fixtures::scenario("paper_6node.json"));
    NetworkState st;
    st.v = Vector::LinSpaced(6, 540.0, 575.0);
    st.i_tilde = Vector::LinSpaced(6, -20.0, 30.0);
    st.sigma = Vector::LinSpaced(6, -0.3, 0.4);
    std::vector<ZipLoad> loads;
    double drawn = 0.0, injected = 0.0, stored = 0.0;
    for (int i = 0; i < 6; ++i) {
        loads.push_back(s.loads[i].actual);
        drawn += zip_current(loads[i], st.v(i), s.loads[i].v_cutoff);
        injected += st.i_tilde(i) + s.converters[i].i_shift();
    }
    const Vector d = sim::closed_loop_rhs(s, sim::pack(st), Vector::Constant(6, 80.0), loads);
    for (int i = 0; i < 6; ++i) stored += s.converters[i].capacitance * d(i);
    CHECK(stored == doctest::Approx(injected - drawn).epsilon(1e-10));
}

TEST_CASE("unforced network reaches consensus") {
    auto s = two_node();
    std::vector<ZipLoad> loads(2);
    NetworkState st;
    st.v = (Vector(2) << 500.0, 600.0).finished();
    st.i_tilde = Vector::Zero(2);
    st.sigma = Vector::Zero(2);
    const Vector refs = Vector::Zero(2);  // u = -i_s: converters inject nothing at equilibrium
    // The equilibrium sits on the boundary of the safe set, so the residual current decays slowly.
    auto f = [&](double, const Vector& x) -> Vector { return sim::closed_loop_rhs(s, x, refs, loads); };
    const Vector x = integrate_interval(sim::pack(st), f, 0.0, 2.0, 1e-5);
    const auto end = sim::unpack(s, x);
    CHECK(analysis::kernel_distance(end.v) < 1e-2);
    CHECK(end.v.mean() > 240.0);
}

TEST_CASE("dynamic lines carry the algebraic current at steady state") {
    auto s = io::load_scenario(fixtures::scenario("paper_6node.json"));
    s.lines = sim::LineDynamics::Dynamic;
    NetworkState st;
    st.v = Vector::LinSpaced(6, 550.0, 565.0);
    st.i_tilde = Vector::Zero(6);
    st.sigma = Vector::Zero(6);
    st.line_currents = analysis::line_currents(s.topology, st.v);
    std::vector<ZipLoad> loads;
    for (const auto& l : s.loads) loads.push_back(l.actual);
    const Vector d = sim::closed_loop_rhs(s, sim::pack(st), Vector::Constant(6, 80.0), loads);
    CHECK(d.tail(s.topology.edge_count()).cwiseAbs().maxCoeff() < 1e-6);

    s.lines = sim::LineDynamics::Algebraic;
    st.line_currents.resize(0);
    const Vector a = sim::closed_loop_rhs(s, sim::pack(st), Vector::Constant(6, 80.0), loads);
    CHECK((d.head(18) - a).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("scenario validation") {
    auto s = two_node();
    s.step = s.ocp.sample / 5.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = two_node();
    s.lines = sim::LineDynamics::Dynamic;  // edges have no inductance
    CHECK_THROWS_AS(s.validate(), Error);
    s = two_node();
    s.v_ref = 900.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = two_node();
    s.schedule.push_back({5.0, 0, ZipLoad::constant_power(1.0)});
    CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("two-node closed loop passes every monitor and is deterministic") {
    const auto s = two_node();
    const auto a = sim::run(s);
    REQUIRE(a.completed);
    CHECK(a.all_passed());
    CHECK(a.monitors.size() == sim::monitor_names().size());
    for (std::size_t k = 0; k < a.monitors.size(); ++k) CHECK(a.monitors[k].name == sim::monitor_names()[k]);

    // Trace channels are complete and time is strictly increasing.
    const auto& t = a.trace;
    const std::size_t rows = t.time.size();
    CHECK(rows > 10);
    for (std::size_t k = 1; k < rows; ++k) CHECK(t.time[k] > t.time[k - 1]);
    CHECK(t.v.size() == rows);
    CHECK(t.value.size() == rows);
    CHECK(t.equilibrium_offset.size() == rows);
    CHECK(t.current_deviation.size() == rows);

    const auto b = sim::run(s);
    CHECK(a.trace.v == b.trace.v);
    CHECK(a.trace.i_ref == b.trace.i_ref);

    auto parallel = s;
    parallel.workers = 2;
    const auto c = sim::run(parallel);
    CHECK(a.trace.v == c.trace.v);
    CHECK(a.log.size() == c.log.size());
}

TEST_CASE("neighbour snapshots change only at sample boundaries") {
    auto s = two_node();
    s.t_end = 0.05;
    s.schedule.push_back({0.02, 1, ZipLoad::constant_power(35000.0)});
    const auto r = sim::run(s);
    REQUIRE(r.completed);
    // Node 0 sees the step through w at the sample after the step, and w is one value per sample.
    std::vector<double> w0;
    for (const auto& rec : r.log) {
        if (rec.node == 0) w0.push_back(rec.w);
    }
    CHECK(w0.size() == static_cast<std::size_t>(std::llround(s.t_end / s.ocp.sample)));
    for (std::size_t k = 1; k < w0.size(); ++k) {
        const auto& rec = r.log[2 * k];
        CHECK(rec.node == 0);
        CHECK(rec.dw == w0[k] - w0[k - 1]);
    }
}

TEST_CASE("strong coupling reports a terminal-set failure") {
    const auto s = io::load_scenario(fixtures::scenario("strong_coupling.json"));
    const auto r = sim::run(s);
    CHECK_FALSE(r.completed);
    REQUIRE(r.error_kind.has_value());
    CHECK(*r.error_kind == ErrorKind::TerminalSet);
    CHECK_FALSE(r.all_passed());
}
