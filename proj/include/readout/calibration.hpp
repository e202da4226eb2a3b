#pragma once

#include <vector>

#include "readout/dynamics.hpp"
#include "readout/model.hpp"

namespace readout {

struct StarkDataset {
    std::vector<double> powers; // drive settings, arbitrary units or rad/s
    std::vector<double> shifts; // qubit line displacement per setting, rad/s
    double qubit_freq = 0.0;    // undriven line position, rad/s
};

// Ground-state resonator photons inferred from the qubit shift:
// n_g = shift / (2 (chi_l + chi_h)). PoleError when the shifts cancel.
double photons_from_stark(double shift, double chi_l, double chi_h);

// Inverts |alpha_ss|^2 = n_g for the drive amplitude at omega_d. The steady
// state is linear in the drive, so E = sqrt(n_g) / |alpha_ss(E=1)|.
// PoleError when the unit-drive response vanishes, n_g = 0 maps to E = 0.
double drive_amplitude_from_photons(double n_g, const DispersiveDerived& derived,
                                    const DeviceParams& params, double omega_d);

// Per-photon qubit shift in the two circulating conventions. They agree only
// in the deep two-level limit; the ratio is reported, not reconciled.
struct StarkShiftConventions {
    double mode_resolved = 0.0; // 2 (chi_l + chi_h)
    double two_level = 0.0;     // 2 g^2 / delta_qr
    double ratio = 0.0;         // mode_resolved / two_level
};
StarkShiftConventions stark_shift_conventions(double chi_l, double chi_h,
                                              const DispersiveDerived& derived,
                                              const DeviceParams& params);

struct GaussianPeak {
    double amplitude = 0.0;
    double center = 0.0;
    double width = 0.0; // standard deviation, always positive
    double offset = 0.0;
    double rms_residual = 0.0;
};

// Least-squares y = offset + amplitude exp(-(x - center)^2 / (2 width^2)),
// damped Gauss-Newton on all four parameters. ConvergenceError if the fit
// stalls, invalid_argument for mismatched or undersized inputs.
GaussianPeak fit_gaussian_peak(const std::vector<double>& x,
                               const std::vector<double>& y);

} // namespace readout
