#pragma once

#include "dcgrid/network.hpp"

namespace dcgrid::primary {

inline constexpr double kHalfPi = 1.5707963267948966;

/// Current/integrator pair (i~, sigma) of the bounded integral controller.
struct State {
    double i_tilde = 0.0;
    double sigma = 0.0;
};

struct Derivative {
    double di_tilde = 0.0;
    double dsigma = 0.0;
};

/// sat(x, y): x clipped to [-y, y].
double sat(double x, double y);

struct ControlVoltage {
    double v_bar = 0.0;        // converter output voltage command [V]
    double duty = 0.0;         // v_bar / V_in
    bool out_of_range = false; // v_bar outside [0, V_in]
};

ControlVoltage control_voltage(double v, const State& s, const ConverterParams& p);

/// Closed-loop current and integrator dynamics for the shifted reference u = i_ref - i_s.
Derivative rhs(const State& s, double u, const ConverterParams& p);

/// Same dynamics in polynomial coordinates (i~, sin sigma).
Derivative polynomial_rhs(const State& s_poly, double u, const ConverterParams& p);

/// Equilibrium (sat(u, I_max/2), sat(arcsin(2u/I_max), pi/2)); the arcsin argument is clamped first.
State equilibrium(double u, const ConverterParams& p);

/// Energy-like storage for constant u; requires |sigma| < pi/2 and |u| <= I_max/2.
double lyapunov(const State& s, double u, const ConverterParams& p);

double to_polynomial(double sigma);
double from_polynomial(double sigma_poly);

bool in_safe_set(const State& s, const ConverterParams& p, double slack = 0.0);

}  // namespace dcgrid::primary
