#pragma once

#include "readout/dynamics.hpp"
#include "readout/model.hpp"

namespace readout {

struct ReadoutMetrics {
    double snr = 0.0;           // power convention (squared amplitude ratio)
    double epsilon_a = 0.0;
    double overlap_error = 0.0;
    double t1_error = 0.0;
    double omega_d_opt = 0.0;   // rad/s
    double n_g = 0.0, n_e = 0.0;
};

struct AssignmentErrorBound {
    double overlap_error = 0.0; // erfc term
    double t1_error = 0.0;      // tau/2T1 term
    double epsilon_a = 0.0;     // sum
};

// SNR(tau) = 2 eta kappa_p * integral_0^tau |beta_e - beta_g|^2 dt, trapezoid
// on the trajectory grid with an interpolated final partial interval.
// Throws SpanError when the trajectory does not cover [0, tau].
double snr_integral(const FieldTrajectory& trajectory, const DeviceParams& params,
                    double tau);

AssignmentErrorBound assignment_error_bound(double snr, double tau, double T1);

// Maximizes the steady-state pointer separation |beta_ss^e - beta_ss^g| over
// omega_d in [window_lo, window_hi]: 1001-point grid scan then golden-section.
// Throws WindowError if the maximum sits on the window boundary.
double optimal_drive_frequency(const DispersiveDerived& derived,
                               const DeviceParams& params, double window_lo,
                               double window_hi);

struct PhotonNumbers {
    double g = 0.0, e = 0.0;
};

// Steady-state resonator populations |alpha_ss^{g/e}|^2.
PhotonNumbers photon_numbers(const DispersiveDerived& derived,
                             const DeviceParams& params, const DriveSpec& drive);

// Full per-point evaluation: optimal drive frequency inside the window, then
// trajectory SNR at drive.tau and the error-bound split at params.T1.
ReadoutMetrics evaluate_readout(const DispersiveDerived& derived,
                                const DeviceParams& params, DriveSpec drive,
                                double window_lo, double window_hi);

struct SnrBand {
    double lo = 0.0, hi = 0.0;
};

// Min/max SNR over the 16 corner combinations of +-freq_dev applied to
// g_charge, J, omega_r_bare and kappa_p, scaled by eta*(1 -+ eta_rel_dev).
SnrBand snr_uncertainty_band(const DeviceParams& params, const DriveSpec& drive,
                             double freq_dev, double eta_rel_dev);

} // namespace readout
