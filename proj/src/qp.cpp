#include "dcgrid/qp.hpp"

#include <algorithm>
#include <cmath>

namespace dcgrid::qp {

const char* to_string(QpStatus status) noexcept {
    switch (status) {
        case QpStatus::Optimal: return "optimal";
        case QpStatus::MaxIterations: return "max-iterations";
        case QpStatus::Infeasible: return "infeasible";
        case QpStatus::Numerical: return "numerical";
    }
    return "unknown";
}

namespace {

double max_step(const Vector& x, const Vector& dx) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (dx(i) < 0.0) alpha = std::min(alpha, -x(i) / dx(i));
    }
    return alpha;
}

}  // namespace

QpResult solve(const Matrix& h, const Vector& c, const Matrix& a, const Vector& b, const QpOptions& options) {
    const auto n = h.rows();
    const auto m = a.rows();
    QpResult result;
    result.x = Vector::Zero(n);
    result.multipliers = Vector::Zero(m);

    if (m == 0) {
        Eigen::LDLT<Matrix> ldlt(h);
        if (ldlt.info() != Eigen::Success) return result;
        result.x = ldlt.solve(-c);
        result.objective = 0.5 * result.x.dot(h * result.x) + c.dot(result.x);
        result.status = result.x.allFinite() ? QpStatus::Optimal : QpStatus::Numerical;
        return result;
    }

    Vector x = Vector::Zero(n);
    Vector s = (b - a * x).cwiseMax(1.0);
    Vector z = Vector::Ones(m);
    const double scale_c = 1.0 + c.lpNorm<Eigen::Infinity>();
    const double scale_b = 1.0 + b.lpNorm<Eigen::Infinity>();
    const double reg = 1e-12 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());

    for (int it = 0; it < options.max_iterations; ++it) {
        result.iterations = it;
        const Vector r_d = h * x + c + a.transpose() * z;
        const Vector r_p = a * x + s - b;
        const double mu = s.dot(z) / static_cast<double>(m);
        if (r_d.lpNorm<Eigen::Infinity>() <= options.tolerance * scale_c &&
            r_p.lpNorm<Eigen::Infinity>() <= options.tolerance * scale_b && mu <= options.tolerance) {
            result.status = QpStatus::Optimal;
            break;
        }
        const Vector d = z.cwiseQuotient(s);
        Matrix k = h + a.transpose() * d.asDiagonal() * a;
        k.diagonal().array() += reg;
        Eigen::LDLT<Matrix> ldlt(k);
        if (ldlt.info() != Eigen::Success) {
            result.status = QpStatus::Numerical;
            break;
        }
        auto direction = [&](const Vector& r_c, Vector& dx, Vector& ds, Vector& dz) {
            // r_c = S Z e - target; eliminates ds and dz onto the normal equations.
            const Vector tmp = d.cwiseProduct(r_p) - r_c.cwiseQuotient(s);
            dx = ldlt.solve(-r_d - a.transpose() * tmp);
            dz = d.cwiseProduct(a * dx + r_p) - r_c.cwiseQuotient(s);
            ds = -(r_c + s.cwiseProduct(dz)).cwiseQuotient(z);
        };
        Vector dx, ds, dz;
        const Vector sz = s.cwiseProduct(z);
        direction(sz, dx, ds, dz);
        const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
        const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
        const double centering = std::pow(mu_aff / mu, 3);
        const Vector r_c = sz + ds.cwiseProduct(dz) - Vector::Constant(m, centering * mu);
        direction(r_c, dx, ds, dz);
        const double alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(z, dz)));
        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
        if (!x.allFinite() || !s.allFinite() || !z.allFinite()) {
            result.status = QpStatus::Numerical;
            break;
        }
        result.iterations = it + 1;
        result.status = QpStatus::MaxIterations;
    }
    if (result.status == QpStatus::MaxIterations) {
        const Vector r_p = a * x - b;
        if (r_p.maxCoeff() > 1e-6 * scale_b && z.lpNorm<Eigen::Infinity>() > 1e8) result.status = QpStatus::Infeasible;
    }
    result.x = x;
    result.multipliers = z;
    result.objective = 0.5 * x.dot(h * x) + c.dot(x);
    return result;
}

}  // namespace dcgrid::qp
