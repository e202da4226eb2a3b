#pragma once

#include <array>
#include <complex>

#include "readout/model.hpp"

namespace readout {

// Hybridized low/high normal modes of the resonator-filter pair, per qubit state.
// Labels l/h are assigned by ascending real eigenvalue part, per state.
struct NormalModes {
    double omega_l_g = 0.0, omega_l_e = 0.0;
    double omega_h_g = 0.0, omega_h_e = 0.0;
    double kappa_l_g = 0.0, kappa_l_e = 0.0;
    double kappa_h_g = 0.0, kappa_h_e = 0.0;
    double chi_l = 0.0, chi_h = 0.0;
    // lambda_{l,h}^{g/e}: order {l_g, h_g, l_e, h_e}
    std::array<std::complex<double>, 4> eigvals{};
    bool expansion_valid = true; // only meaningful for approx_modes
};

// Eigenvalues of [[omega_r, J],[J, omega_p - i kappa_p/2]]; omega = Re,
// kappa = -2 Im. Uses the state-dependent couplings J_eff_{g,e}.
NormalModes exact_modes(const DispersiveDerived& derived, const DeviceParams& params);

// First-order expansions in 1/J; assumes J_eff ~ J. For cross-validation only.
NormalModes approx_modes(const DispersiveDerived& derived, const DeviceParams& params);

} // namespace readout
