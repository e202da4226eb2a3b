#include "readout/model.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "readout/errors.hpp"
#include "readout/units.hpp"

namespace readout {

DispersiveDerived derive_dispersive_dressed(const DeviceParams& params,
                                            double omega_q, double omega_r_g) {
    const double g = params.g_charge;
    const double ec = params.E_c;
    const double dqr = omega_q - omega_r_g;

    // Pole guard scaled to E_c so rounding in omega differences cannot slip past.
    const double guard = 1e-9 * std::abs(ec);
    if (std::abs(dqr) <= guard || std::abs(dqr - ec) <= guard)
        throw PoleError("derive_dispersive: detuning at a pole (0 or E_c)");

    DispersiveDerived d;
    d.delta_qr = dqr;
    d.omega_r_g = omega_r_g;
    d.lambda = g / dqr;
    d.lambda_prime = d.lambda * ec / (dqr + ec * (1.0 - 2.0 * d.lambda * d.lambda));
    d.chi = -g * g * ec / (dqr * (dqr - ec));
    d.omega_r_e = d.omega_r_g + 2.0 * d.chi;
    d.delta_rp_g = d.omega_r_g - params.omega_p;
    d.delta_rp_e = d.omega_r_e - params.omega_p;
    // J^{g/e} = J(1 - lambda*lambda'*(<sz>+1)); <sz> = -1 (g), +1 (e)
    d.J_eff_g = params.J;
    d.J_eff_e = params.J * (1.0 - 2.0 * d.lambda * d.lambda_prime);
    d.kerr_ratio = 1.0 + 4.0 * d.lambda_prime / d.lambda;
    d.dispersive_valid = std::abs(d.lambda) < 0.5;
    return d;
}

DispersiveDerived derive_dispersive(const DeviceParams& params,
                                    std::optional<double> omega_q_override) {
    const double omega_q = omega_q_override.value_or(params.omega_q);
    const double delta_bare = omega_q - params.omega_r_bare;
    if (delta_bare == 0.0)
        throw PoleError("derive_dispersive: qubit resonant with bare resonator");
    // One Lamb-shift pass; no iteration (the re-evaluated detuning feeds chi).
    const double g = params.g_charge;
    const double omega_r_g = params.omega_r_bare - g * g / delta_bare;
    return derive_dispersive_dressed(params, omega_q, omega_r_g);
}

double n_crit(const DeviceParams& params, const DispersiveDerived& derived) {
    const double g = params.g_charge;
    if (g == 0.0)
        throw PoleError("n_crit: zero charge coupling");
    return derived.delta_qr * derived.delta_qr / (4.0 * g * g);
}

DeviceParams load_device_params(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open device file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("device file " + path + ": " + e.what());
    }

    auto get = [&](const char* key) -> double {
        if (!j.contains(key))
            throw ParseError("device file " + path + ": missing key '" + key + "'");
        return j.at(key).get<double>();
    };

    DeviceParams p;
    p.omega_q = hz_to_rad(get("omega_q"));
    p.alpha = hz_to_rad(get("alpha"));
    p.E_c = j.contains("E_c") ? hz_to_rad(j.at("E_c").get<double>()) : -p.alpha;
    p.g_charge = hz_to_rad(get("g_charge"));
    p.g_bare = hz_to_rad(get("g_bare"));
    p.omega_r_bare = hz_to_rad(get("omega_r_bare"));
    p.omega_p = hz_to_rad(get("omega_p"));
    p.J = hz_to_rad(get("J"));
    p.kappa_p = hz_to_rad(get("kappa_p"));
    p.T1 = get("T1");
    p.eta = j.contains("eta") ? j.at("eta").get<double>() : 0.5;

    if (p.alpha >= 0.0)
        throw ParseError("device file " + path + ": alpha must be negative");
    if (std::abs(p.E_c + p.alpha) > 1e-9 * std::abs(p.alpha))
        throw ParseError("device file " + path + ": E_c must equal -alpha");
    if (p.kappa_p <= 0.0 || p.J <= 0.0 || p.T1 <= 0.0)
        throw ParseError("device file " + path + ": kappa_p, J, T1 must be positive");
    if (p.eta < 0.0 || p.eta > 1.0)
        throw ParseError("device file " + path + ": eta outside [0,1]");
    return p;
}

} // namespace readout
