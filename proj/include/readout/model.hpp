#pragma once

#include <optional>
#include <string>

namespace readout {

// Static device parameters of the qubit--resonator--filter chain.
// Angular frequencies in rad/s, T1 in seconds, eta dimensionless.
struct DeviceParams {
    double omega_q = 0.0;      // qubit transition during readout
    double alpha = 0.0;        // anharmonicity, negative
    double E_c = 0.0;          // charging energy, = -alpha
    double g_charge = 0.0;     // qubit-resonator charge coupling
    double g_bare = 0.0;       // qubit-resonator coupling from hybridization fits
    double omega_r_bare = 0.0; // bare readout resonator
    double omega_p = 0.0;      // Purcell filter
    double J = 0.0;            // resonator-filter coupling
    double kappa_p = 0.0;      // filter linewidth
    double T1 = 0.0;           // qubit lifetime, s
    double eta = 0.5;          // measurement efficiency
};

// Dispersive-frame quantities derived from DeviceParams.
struct DispersiveDerived {
    double delta_qr = 0.0;     // omega_q - omega_r_g (dressed detuning)
    double lambda = 0.0;       // g_charge / delta_qr
    double lambda_prime = 0.0;
    double chi = 0.0;          // total dispersive shift
    double omega_r_g = 0.0;    // dressed resonator, qubit in g
    double omega_r_e = 0.0;    // omega_r_g + 2*chi
    double delta_rp_g = 0.0;   // omega_r_g - omega_p
    double delta_rp_e = 0.0;
    double J_eff_g = 0.0;      // state-dependent resonator-filter coupling
    double J_eff_e = 0.0;
    double kerr_ratio = 0.0;   // K_e / K_g
    bool dispersive_valid = true; // false when |lambda| >= 0.5
};

// Single Lamb-shift pass from the bare resonator frequency, then the detuning
// is re-evaluated against the dressed omega_r_g for everything chi-related.
// The charge coupling is used throughout; g_bare is carried but not consumed.
DispersiveDerived derive_dispersive(const DeviceParams& params,
                                    std::optional<double> omega_q_override = std::nullopt);

// Same derivation starting from a known dressed resonator frequency
// (e.g. taken from a spectral fit) instead of the bare one.
DispersiveDerived derive_dispersive_dressed(const DeviceParams& params,
                                            double omega_q, double omega_r_g);

// Critical photon number delta_qr^2 / (4 g_charge^2), dressed detuning.
double n_crit(const DeviceParams& params, const DispersiveDerived& derived);

// Flat JSON file, keys = field names, frequencies in Hz. E_c optional (-alpha).
DeviceParams load_device_params(const std::string& path);

} // namespace readout
