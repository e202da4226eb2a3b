#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "readout/lm.hpp"

namespace readout {

struct SpectrumModel {
    double A = 1.0;        // background amplitude, > 0
    double k = 0.0;        // tilt slope per rad/s
    double omega_0 = 0.0;  // tilt center, rad/s
    double phi = 0.0;      // rad, |phi| <= pi
    double kappa_p = 0.0;  // rad/s
    double J = 0.0;        // rad/s
    double omega_p = 0.0;  // rad/s
    double omega_r_g = 0.0;
    double omega_r_e = 0.0;
};

struct SpectrumTrace {
    std::vector<double> freqs;      // rad/s, strictly increasing
    std::vector<double> magnitudes; // dimensionless, >= 0
    char state_label = 'g';
};

// Resonator-loaded filter term kappa_p(-2i dr)/(4J^2 + (kappa_p - 2i dp)(-2i dr))
// with dp = omega - omega_p, dr = omega - omega_r^{g/e}.
std::complex<double> filter_reflection(const SpectrumModel& model, double omega,
                                       bool excited);

// (A + k(omega - omega_0)) |cos(phi) - e^{i phi} filter_reflection|.
double spectrum_magnitude(const SpectrumModel& model, double omega, bool excited);

SpectrumTrace synth_spectrum(const SpectrumModel& model,
                             const std::vector<double>& freqs, char state_label);

// Uniform 2001-point grid over [omega_p - 5 kappa_p, omega_p + 5 kappa_p].
std::vector<double> default_fit_grid(const SpectrumModel& model);

// Seeds a joint fit from the two deepest dips of each trace: dip midpoints fix
// omega_p and omega_r^{g/e} through the mode-sum rule, half the dip separation
// seeds J, and summed dip widths seed kappa_p.
SpectrumModel initial_model_from_traces(const SpectrumTrace& trace_g,
                                        const SpectrumTrace& trace_e);

struct SpectrumFit {
    SpectrumModel model;
    Eigen::MatrixXd covariance; // 9x9, order: A, k, omega_0, phi, kappa_p, J,
                                // omega_p, omega_r_g, omega_r_e; the omega_0
                                // row/column is zero (held fixed, see below)
    double residual_norm = 0.0;
    int iterations = 0;
    double condition_number = 0.0;
    bool identifiable = true;   // condition number <= 1e10
};

// Joint fit of both traces; A, k, phi, kappa_p, J, omega_p shared, omega_r_g /
// omega_r_e per state. omega_0 is held at its initial value: the background
// line has only two independent parameters, so a floating pivot is exactly
// degenerate with A. phi is reported in [-pi/2, pi/2] (the magnitude model is
// invariant under phi -> phi + pi). Throws ConvergenceError if the iteration
// cap is reached without meeting the parameter tolerance.
SpectrumFit fit_spectrum(const SpectrumTrace& trace_g, const SpectrumTrace& trace_e,
                         const SpectrumModel& initial, const LmOptions& opts = {});

} // namespace readout
