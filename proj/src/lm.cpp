#include "readout/lm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace readout {

namespace {

Eigen::MatrixXd fd_jacobian(const ResidualFn& f, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& scales, const Eigen::VectorXd& r0,
                            double rel_step) {
    const auto n = q.size();
    Eigen::MatrixXd J(r0.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = rel_step * std::max(std::abs(q[i]), 1.0);
        Eigen::VectorXd qh = q;
        qh[i] += h;
        J.col(i) = (f(qh.cwiseProduct(scales)) - r0) / h;
    }
    return J;
}

} // namespace

LmResult levenberg_marquardt(const ResidualFn& residuals, const Eigen::VectorXd& p0,
                             const Eigen::VectorXd& scales, const LmOptions& opts) {
    if (p0.size() != scales.size())
        throw std::invalid_argument("levenberg_marquardt: scale/parameter size mismatch");
    if ((scales.array() <= 0.0).any())
        throw std::invalid_argument("levenberg_marquardt: scales must be positive");

    Eigen::VectorXd q = p0.cwiseQuotient(scales);
    Eigen::VectorXd r = residuals(p0);
    double cost = r.squaredNorm();
    double lambda = opts.lambda0;

    LmResult out;
    Eigen::MatrixXd J;
    for (out.iterations = 0; out.iterations < opts.max_iterations; ++out.iterations) {
        J = fd_jacobian(residuals, q, scales, r, opts.fd_step);
        const Eigen::MatrixXd H = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        const double diag_floor = 1e-12 * H.diagonal().maxCoeff() + 1e-300;

        bool accepted = false;
        Eigen::VectorXd step;
        while (lambda < 1e14) {
            Eigen::MatrixXd damped = H;
            damped.diagonal() += lambda * (H.diagonal().array() + diag_floor).matrix();
            step = damped.ldlt().solve(-g);
            const Eigen::VectorXd q_new = q + step;
            const Eigen::VectorXd r_new = residuals(q_new.cwiseProduct(scales));
            const double cost_new = r_new.squaredNorm();
            if (cost_new <= cost) {
                q = q_new;
                r = r_new;
                accepted = true;
                const double drop = cost - cost_new;
                cost = cost_new;
                lambda = std::max(lambda / 3.0, 1e-12);
                double rel_step_norm = 0.0;
                for (Eigen::Index i = 0; i < q.size(); ++i)
                    rel_step_norm = std::max(rel_step_norm,
                                             std::abs(step[i]) / (1.0 + std::abs(q[i])));
                if (rel_step_norm <= opts.rel_tolerance
                    || drop <= opts.rel_tolerance * (cost + 1e-300))
                    out.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted || out.converged) {
            ++out.iterations;
            break;
        }
    }

    out.params = q.cwiseProduct(scales);
    out.cost = cost;

    // Covariance and conditioning from the scaled normal matrix at the optimum.
    J = fd_jacobian(residuals, q, scales, r, opts.fd_step);
    const Eigen::MatrixXd H = J.transpose() * J;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double ev_max = ev.maxCoeff();
    const double ev_min = ev.minCoeff();
    out.condition_number = (ev_min > 0.0) ? ev_max / ev_min
                                          : std::numeric_limits<double>::infinity();

    const auto m = r.size();
    const auto n = q.size();
    const double sigma_sq = (m > n) ? cost / static_cast<double>(m - n) : 0.0;
    Eigen::VectorXd inv_ev = ev;
    for (Eigen::Index i = 0; i < n; ++i)
        inv_ev[i] = (ev[i] > 1e-14 * ev_max) ? 1.0 / ev[i] : 0.0;
    Eigen::MatrixXd cov_scaled = es.eigenvectors() * inv_ev.asDiagonal()
        * es.eigenvectors().transpose() * sigma_sq;
    out.covariance = cov_scaled.array()
        * (scales * scales.transpose()).array();
    return out;
}

} // namespace readout
