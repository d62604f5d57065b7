#include "dcgrid/primary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dcgrid/error.hpp"

namespace dcgrid::primary {

double sat(double x, double y) { return std::clamp(x, -y, y); }

ControlVoltage control_voltage(double v, const State& s, const ConverterParams& p) {
    ControlVoltage out;
    out.v_bar = v - p.k_p * s.i_tilde + p.resistance * p.i_shift() + p.authority() * std::sin(s.sigma);
    out.duty = out.v_bar / p.v_in;
    out.out_of_range = out.v_bar < 0.0 || out.v_bar > p.v_in;
    return out;
}

Derivative rhs(const State& s, double u, const ConverterParams& p) {
    const double m = p.authority();
    return {(-(p.resistance + p.k_p) * s.i_tilde + m * std::sin(s.sigma)) / p.inductance,
            p.k_i * (u - s.i_tilde) * std::cos(s.sigma) / m};
}

Derivative polynomial_rhs(const State& s, double u, const ConverterParams& p) {
    const double m = p.authority();
    return {(-(p.resistance + p.k_p) * s.i_tilde + m * s.sigma) / p.inductance,
            p.k_i * (u - s.i_tilde) * (1.0 - s.sigma * s.sigma) / m};
}

State equilibrium(double u, const ConverterParams& p) {
    const double ratio = std::clamp(2.0 * u / p.i_max, -1.0, 1.0);
    return {sat(u, p.input_bound()), sat(std::asin(ratio), kHalfPi)};
}

double lyapunov(const State& s, double u, const ConverterParams& p) {
    if (!(std::abs(s.sigma) < kHalfPi)) {
        std::ostringstream msg;
        msg << "storage function undefined at sigma = " << s.sigma << " (boundary of the safe set)";
        fail(ErrorKind::Domain, msg.str());
    }
    const double bound = p.input_bound();
    if (std::abs(u) > bound * (1.0 + 1e-12)) fail(ErrorKind::Domain, "storage function needs |u| <= I_max/2");
    const double m = p.authority();
    const double scale = m * m / p.k_i;
    const double a = 2.0 * u / p.i_max;
    const double sn = std::sin(s.sigma);
    if (std::abs(a) >= 1.0) {
        // Limiting form for a saturated reference.
        const double denom = a > 0.0 ? 1.0 + sn : 1.0 - sn;
        return 0.5 * p.inductance * s.i_tilde * s.i_tilde + scale * std::log(std::abs(2.0 / denom));
    }
    const double di = s.i_tilde - u;
    return 0.5 * p.inductance * di * di +
           scale * (1.0 - a) * std::log(std::abs(m * std::sqrt(1.0 - a * a) / std::cos(s.sigma))) +
           scale * a * std::log(std::abs((1.0 + a) / (1.0 + sn)));
}

double to_polynomial(double sigma) {
    if (!(std::abs(sigma) <= kHalfPi)) fail(ErrorKind::Domain, "sigma outside [-pi/2, pi/2]");
    return std::sin(sigma);
}

double from_polynomial(double sigma_poly) {
    if (!(std::abs(sigma_poly) <= 1.0)) fail(ErrorKind::Domain, "polynomial coordinate outside [-1, 1]");
    return std::asin(sigma_poly);
}

bool in_safe_set(const State& s, const ConverterParams& p, double slack) {
    return std::abs(s.i_tilde) <= p.input_bound() + slack && std::abs(s.sigma) <= kHalfPi + slack;
}

}  // namespace dcgrid::primary
