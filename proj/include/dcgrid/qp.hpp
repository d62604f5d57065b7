#pragma once

#include "dcgrid/network.hpp"

namespace dcgrid::qp {

enum class QpStatus { Optimal, MaxIterations, Infeasible, Numerical };

struct QpResult {
    Vector x;
    Vector multipliers;  // one per inequality row, >= 0
    double objective = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::Numerical;
};

struct QpOptions {
    double tolerance = 1e-10;
    int max_iterations = 100;
};

/// Dense convex QP  min 1/2 x'Hx + c'x  s.t.  A x <= b, solved by a Mehrotra
/// predictor-corrector interior point method. H must be positive semidefinite and
/// H + A'A positive definite.
QpResult solve(const Matrix& h, const Vector& c, const Matrix& a, const Vector& b, const QpOptions& options = {});

const char* to_string(QpStatus status) noexcept;

}  // namespace dcgrid::qp
