#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "common.hpp"
#include "dcgrid/error.hpp"
#include "dcgrid/primary.hpp"

using namespace dcgrid;
using namespace dcgrid::primary;

namespace {
const double kPi = std::acos(-1.0);
}

TEST_CASE("control voltage") {
    const auto p = fixtures::converter();
    const double m = 0.5 * (p.resistance + p.k_p) * p.i_max;
    auto cv = control_voltage(560.0, {0.0, 0.0}, p);
    CHECK(cv.v_bar == doctest::Approx(560.0 + 0.2 * 89.35).epsilon(1e-14));
    CHECK(cv.v_bar == doctest::Approx(577.87).epsilon(1e-12));
    CHECK(cv.duty == doctest::Approx(577.87 / 800.0).epsilon(1e-12));
    CHECK_FALSE(cv.out_of_range);

    // At equilibrium the drop equals r times the converter current.
    const double u = 37.0;
    const auto eq = equilibrium(u, p);
    cv = control_voltage(560.0, eq, p);
    CHECK(cv.v_bar - 560.0 == doctest::Approx(p.resistance * (p.i_shift() + u)).epsilon(1e-12));

    const double lo = control_voltage(560.0, {0.0, -kPi / 2}, p).v_bar;
    const double hi = control_voltage(560.0, {0.0, kPi / 2}, p).v_bar;
    CHECK(hi - lo == doctest::Approx(2.0 * m).epsilon(1e-12));
    CHECK(control_voltage(790.0, {-80.0, kPi / 2}, p).out_of_range);
}

TEST_CASE("closed-loop primary right-hand side") {
    const auto p = fixtures::converter();
    const double m = 0.5 * (p.resistance + p.k_p) * p.i_max;
    for (double u : {-60.0, 0.0, 12.5, 80.0}) {
        const auto d = rhs(equilibrium(u, p), u, p);
        CHECK(std::abs(d.di_tilde) < 1e-9);
        CHECK(std::abs(d.dsigma) < 1e-12);
    }
    for (double u : {-80.0, 0.0, 80.0}) {
        CHECK(std::abs(rhs({10.0, kPi / 2}, u, p).dsigma) < 1e-12);
        CHECK(std::abs(rhs({10.0, -kPi / 2}, u, p).dsigma) < 1e-12);
    }
    const auto d = rhs({0.0, kPi / 6}, 0.0, p);
    CHECK(d.di_tilde == doctest::Approx(m * 0.5 / p.inductance).epsilon(1e-12));
    CHECK(d.di_tilde == doctest::Approx(54602.777777).epsilon(1e-9));
    const auto d2 = rhs({5.0, 0.3}, 20.0, p);
    CHECK(d2.dsigma == doctest::Approx(p.k_i * 15.0 * std::cos(0.3) / m).epsilon(1e-14));
}

TEST_CASE("equilibrium and saturation") {
    const auto p = fixtures::converter();
    auto eq = equilibrium(50.0, p);
    CHECK(eq.i_tilde == 50.0);
    CHECK(eq.sigma == doctest::Approx(std::asin(100.0 / 178.7)).epsilon(1e-14));
    CHECK(eq.sigma == doctest::Approx(0.5939).epsilon(1e-4));
    eq = equilibrium(100.0, p);
    CHECK(eq.i_tilde == doctest::Approx(89.35));
    CHECK(eq.sigma == doctest::Approx(kPi / 2));
    eq = equilibrium(-1e6, p);
    CHECK(eq.i_tilde == doctest::Approx(-89.35));
    CHECK(eq.sigma == doctest::Approx(-kPi / 2));
    eq = equilibrium(0.0, p);
    CHECK(eq.i_tilde == 0.0);
    CHECK(eq.sigma == 0.0);
}

TEST_CASE("sat is odd and idempotent") {
    for (double x : {-5.0, -1.0, 0.0, 0.3, 2.0, 7.0}) {
        CHECK(sat(sat(x, 2.0), 2.0) == sat(x, 2.0));
        CHECK(sat(-x, 2.0) == -sat(x, 2.0));
    }
    CHECK(sat(3.0, 2.0) == 2.0);
    CHECK(sat(1.0, 2.0) == 1.0);
}

TEST_CASE("storage function") {
    const auto p = fixtures::converter();
    const double m = 0.5 * (p.resistance + p.k_p) * p.i_max;
    const double scale = m * m / p.k_i;
    const double u = 30.0;
    const auto eq = equilibrium(u, p);
    const double w_eq = lyapunov(eq, u, p);
    // Independent evaluation of the three-term expression.
    auto oracle = [&](double i, double s) {
        const double a = 2.0 * u / p.i_max;
        return 0.5 * p.inductance * (i - u) * (i - u) +
               scale * (1 - a) * std::log(std::abs(m * std::sqrt(1 - a * a) / std::cos(s))) +
               scale * a * std::log(std::abs((1 + a) / (1 + std::sin(s))));
    };
    CHECK(lyapunov({12.0, -0.4}, u, p) == doctest::Approx(oracle(12.0, -0.4)).epsilon(1e-13));

    // Exact time derivative along the flow equals -(r + k_P)(i - u)^2.
    const State s{-20.0, 0.7};
    const auto d = rhs(s, u, p);
    const double h = 1e-6;
    const double dwdi = (lyapunov({s.i_tilde + h, s.sigma}, u, p) - lyapunov({s.i_tilde - h, s.sigma}, u, p)) / (2 * h);
    const double dwds = (lyapunov({s.i_tilde, s.sigma + h}, u, p) - lyapunov({s.i_tilde, s.sigma - h}, u, p)) / (2 * h);
    const double wdot = dwdi * d.di_tilde + dwds * d.dsigma;
    CHECK(wdot == doctest::Approx(-(p.resistance + p.k_p) * (s.i_tilde - u) * (s.i_tilde - u)).epsilon(1e-6));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ui(-89.0, 89.0), us(-1.5, 1.5);
    for (int k = 0; k < 200; ++k) {
        const State x{ui(rng), us(rng)};
        if (std::abs(x.i_tilde - eq.i_tilde) + std::abs(x.sigma - eq.sigma) < 1e-6) continue;
        CHECK(lyapunov(x, u, p) > w_eq);
    }

    // Limiting form at a saturated reference.
    const double w_lim = lyapunov({10.0, 0.2}, p.input_bound(), p);
    CHECK(w_lim == doctest::Approx(0.5 * p.inductance * 100.0 + scale * std::log(2.0 / (1.0 + std::sin(0.2)))));

    CHECK_THROWS_AS(lyapunov({0.0, kPi / 2}, u, p), Error);
    CHECK_THROWS_AS(lyapunov({0.0, 0.0}, 100.0, p), Error);
}

TEST_CASE("polynomial coordinates") {
    CHECK(to_polynomial(0.0) == 0.0);
    CHECK(to_polynomial(kPi / 2) == doctest::Approx(1.0).epsilon(1e-15));
    for (double s = -1.5; s <= 1.5; s += 0.01) CHECK(std::abs(from_polynomial(to_polynomial(s)) - s) <= 1e-12);
    CHECK_THROWS_AS(to_polynomial(2.0), Error);
    CHECK_THROWS_AS(from_polynomial(1.1), Error);

    // Right-hand side in polynomial form: chain rule through sin.
    const auto p = fixtures::converter();
    const State s{12.0, 0.6};
    const auto d = rhs(s, 40.0, p);
    const auto dp = polynomial_rhs({12.0, std::sin(0.6)}, 40.0, p);
    CHECK(dp.di_tilde == doctest::Approx(d.di_tilde).epsilon(1e-13));
    CHECK(dp.dsigma == doctest::Approx(std::cos(0.6) * d.dsigma).epsilon(1e-13));
}

TEST_CASE("safe set membership") {
    const auto p = fixtures::converter();
    CHECK(in_safe_set({89.35, kPi / 2}, p));
    CHECK_FALSE(in_safe_set({89.36, 0.0}, p));
    CHECK(in_safe_set({89.36, 0.0}, p, 0.02));
}
