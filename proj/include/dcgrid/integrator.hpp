#pragma once

#include <cmath>
#include <sstream>
#include <utility>

#include "dcgrid/error.hpp"
#include "dcgrid/network.hpp"

namespace dcgrid {

/// Raised when a step produces a non-finite component; carries the last finite state.
class DivergenceError : public Error {
public:
    DivergenceError(double time, Vector last_state)
        : Error(ErrorKind::Divergence, message(time)), time_(time), last_state_(std::move(last_state)) {}
    double time() const noexcept { return time_; }
    const Vector& last_state() const noexcept { return last_state_; }

private:
    static std::string message(double t) {
        std::ostringstream msg;
        msg << "integration diverged after t = " << t << " s";
        return msg.str();
    }
    double time_;
    Vector last_state_;
};

/// One classical RK4 step of dx/dt = f(t, x).
template <class Rhs>
Vector rk4_step(Rhs&& f, double t, const Vector& x, double h) {
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = f(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step RK4 from t0 to t1; the last step is shortened when h does not divide the interval.
/// `observer(t, x)` is called after every accepted step.
template <class Rhs, class Observer>
Vector integrate_interval(Vector x, Rhs&& f, double t0, double t1, double h, Observer&& observer) {
    if (!(t1 > t0)) fail(ErrorKind::Domain, "integration interval must satisfy t1 > t0");
    if (!(h > 0.0)) fail(ErrorKind::Domain, "integration step must be positive");
    const double span = t1 - t0;
    auto steps = static_cast<long long>(std::ceil(span / h - 1e-9));
    if (steps < 1) steps = 1;
    double t = t0;
    for (long long k = 0; k < steps; ++k) {
        const double t_next = (k + 1 == steps) ? t1 : t0 + static_cast<double>(k + 1) * h;
        Vector next = rk4_step(f, t, x, t_next - t);
        if (!next.allFinite()) throw DivergenceError(t, x);
        x = std::move(next);
        t = t_next;
        observer(t, x);
    }
    return x;
}

template <class Rhs>
Vector integrate_interval(Vector x, Rhs&& f, double t0, double t1, double h) {
    return integrate_interval(std::move(x), std::forward<Rhs>(f), t0, t1, h, [](double, const Vector&) {});
}

}  // namespace dcgrid
