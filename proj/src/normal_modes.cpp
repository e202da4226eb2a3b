#include "readout/normal_modes.hpp"

#include <cmath>
#include <complex>
#include <utility>

namespace readout {

namespace {

using cd = std::complex<double>;

// Eigenvalues of [[omega_r, J],[J, omega_p - i kappa_p/2]], returned (low, high)
// by real part. Principal-branch sqrt keeps Re(s) >= 0, so low is always C - s/2;
// the explicit comparison guards the measure-zero branch-cut case.
std::pair<cd, cd> mode_eigvals(double omega_r, double omega_p, double kappa_p, double J) {
    const cd half_width(0.0, -kappa_p / 2.0);
    const cd center = (omega_r + omega_p + half_width) / 2.0;
    const cd drp(omega_r - omega_p, kappa_p / 2.0);
    const cd s = std::sqrt(drp * drp + 4.0 * J * J);
    cd lo = center - 0.5 * s;
    cd hi = center + 0.5 * s;
    if (hi.real() < lo.real())
        std::swap(lo, hi);
    return {lo, hi};
}

} // namespace

NormalModes exact_modes(const DispersiveDerived& derived, const DeviceParams& params) {
    auto [lg, hg] = mode_eigvals(derived.omega_r_g, params.omega_p, params.kappa_p,
                                 derived.J_eff_g);
    auto [le, he] = mode_eigvals(derived.omega_r_e, params.omega_p, params.kappa_p,
                                 derived.J_eff_e);
    NormalModes m;
    m.eigvals = {lg, hg, le, he};
    m.omega_l_g = lg.real();
    m.omega_h_g = hg.real();
    m.omega_l_e = le.real();
    m.omega_h_e = he.real();
    m.kappa_l_g = -2.0 * lg.imag();
    m.kappa_h_g = -2.0 * hg.imag();
    m.kappa_l_e = -2.0 * le.imag();
    m.kappa_h_e = -2.0 * he.imag();
    m.chi_l = (m.omega_l_e - m.omega_l_g) / 2.0;
    m.chi_h = (m.omega_h_e - m.omega_h_g) / 2.0;
    return m;
}

NormalModes approx_modes(const DispersiveDerived& derived, const DeviceParams& params) {
    const double J = params.J;
    const double kp = params.kappa_p;
    const double chi = derived.chi;

    NormalModes m;
    m.expansion_valid = (4.0 * J > 2.0 * kp)
        && std::abs(derived.delta_rp_g) < 2.0 * J
        && std::abs(derived.delta_rp_e) < 2.0 * J;

    auto fill_state = [&](double omega_r, double drp, double& omega_l, double& omega_h,
                          double& kappa_l, double& kappa_h) {
        const double mid = (omega_r + params.omega_p) / 2.0;
        const double split = J + (drp * drp - kp * kp / 4.0) / (8.0 * J);
        omega_l = mid - split;
        omega_h = mid + split;
        kappa_l = kp / 2.0 + drp * kp / (4.0 * J);
        kappa_h = kp / 2.0 - drp * kp / (4.0 * J);
    };
    fill_state(derived.omega_r_g, derived.delta_rp_g, m.omega_l_g, m.omega_h_g,
               m.kappa_l_g, m.kappa_h_g);
    fill_state(derived.omega_r_e, derived.delta_rp_e, m.omega_l_e, m.omega_h_e,
               m.kappa_l_e, m.kappa_h_e);

    // 2chi_l = chi - (drp^g chi + chi^2)/2J, and chi_h takes the complement.
    const double corr = (derived.delta_rp_g * chi + chi * chi) / (2.0 * J);
    m.chi_l = (chi - corr) / 2.0;
    m.chi_h = (chi + corr) / 2.0;

    m.eigvals = {cd(m.omega_l_g, -m.kappa_l_g / 2.0), cd(m.omega_h_g, -m.kappa_h_g / 2.0),
                 cd(m.omega_l_e, -m.kappa_l_e / 2.0), cd(m.omega_h_e, -m.kappa_h_e / 2.0)};
    return m;
}

} // namespace readout
