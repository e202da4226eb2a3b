#pragma once

#include <functional>

#include <Eigen/Dense>

namespace readout {

struct LmOptions {
    int max_iterations = 200;
    double rel_tolerance = 1e-8; // on the scaled parameter step
    double lambda0 = 1e-3;
    double fd_step = 1e-6;       // relative forward-difference step, scaled units
};

struct LmResult {
    Eigen::VectorXd params;      // original units
    double cost = 0.0;           // sum of squared residuals
    int iterations = 0;
    bool converged = false;
    Eigen::MatrixXd covariance;  // original units, from (J^T J)^+ at the optimum
    double condition_number = 0.0; // of the scaled J^T J
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Damped least squares with multiplicative damping on the normal-equation
// diagonal. Parameters are scaled internally by `scales` so that mixed-unit
// problems (amplitudes vs angular frequencies) stay well conditioned; the
// finite-difference Jacobian is evaluated in scaled units.
LmResult levenberg_marquardt(const ResidualFn& residuals, const Eigen::VectorXd& p0,
                             const Eigen::VectorXd& scales, const LmOptions& opts = {});

} // namespace readout
