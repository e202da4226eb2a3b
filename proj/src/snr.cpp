#include "readout/snr.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "readout/errors.hpp"

namespace readout {

namespace {

double separation_sq(const FieldTrajectory& traj, std::size_t i) {
    return std::norm(traj.beta_e[i] - traj.beta_g[i]);
}

double pointer_separation(const DispersiveDerived& derived, const DeviceParams& params,
                          double omega_d) {
    DriveSpec probe;
    probe.omega_d = omega_d;
    probe.amplitude = 1.0;
    auto ss = steady_state(derived, params, probe);
    return std::abs(ss.e.beta - ss.g.beta);
}

} // namespace

double snr_integral(const FieldTrajectory& traj, const DeviceParams& params,
                    double tau) {
    if (tau < 0.0 || traj.times.empty()
        || traj.times.back() < tau * (1.0 - 1e-12) - 1e-18)
        throw SpanError("snr_integral: trajectory does not span [0, tau]");
    double integral = 0.0;
    for (std::size_t i = 1; i < traj.times.size(); ++i) {
        const double t0 = traj.times[i - 1];
        const double t1 = traj.times[i];
        const double s0 = separation_sq(traj, i - 1);
        const double s1 = separation_sq(traj, i);
        if (t1 <= tau) {
            integral += 0.5 * (s0 + s1) * (t1 - t0);
        } else {
            if (t0 >= tau)
                break;
            const double frac = (tau - t0) / (t1 - t0);
            const double s_tau = s0 + frac * (s1 - s0);
            integral += 0.5 * (s0 + s_tau) * (tau - t0);
            break;
        }
    }
    return 2.0 * params.eta * params.kappa_p * integral;
}

AssignmentErrorBound assignment_error_bound(double snr, double tau, double T1) {
    AssignmentErrorBound b;
    b.overlap_error = 0.5 * std::erfc(std::sqrt(snr / 8.0));
    b.t1_error = tau / (2.0 * T1);
    b.epsilon_a = b.overlap_error + b.t1_error;
    return b;
}

double optimal_drive_frequency(const DispersiveDerived& derived,
                               const DeviceParams& params, double window_lo,
                               double window_hi) {
    constexpr int kGridPoints = 1001;
    const double span = window_hi - window_lo;
    const double step = span / (kGridPoints - 1);
    int best = 0;
    double best_val = -1.0;
    for (int i = 0; i < kGridPoints; ++i) {
        const double val = pointer_separation(derived, params, window_lo + i * step);
        if (val > best_val) {
            best_val = val;
            best = i;
        }
    }
    if (best == 0 || best == kGridPoints - 1)
        throw WindowError("optimal_drive_frequency: maximum on window boundary");

    // Golden-section on the bracketing grid cells.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = window_lo + (best - 1) * step;
    double b = window_lo + (best + 1) * step;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = pointer_separation(derived, params, x1);
    double f2 = pointer_separation(derived, params, x2);
    for (int it = 0; it < 80 && (b - a) > 1e-6 * step; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = pointer_separation(derived, params, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = pointer_separation(derived, params, x1);
        }
    }
    return (a + b) / 2.0;
}

PhotonNumbers photon_numbers(const DispersiveDerived& derived,
                             const DeviceParams& params, const DriveSpec& drive) {
    auto ss = steady_state(derived, params, drive);
    return {std::norm(ss.g.alpha), std::norm(ss.e.alpha)};
}

ReadoutMetrics evaluate_readout(const DispersiveDerived& derived,
                                const DeviceParams& params, DriveSpec drive,
                                double window_lo, double window_hi) {
    ReadoutMetrics m;
    m.omega_d_opt = optimal_drive_frequency(derived, params, window_lo, window_hi);
    drive.omega_d = m.omega_d_opt;
    auto traj = integrate_eom(derived, params, drive);
    m.snr = snr_integral(traj, params, drive.tau);
    auto bound = assignment_error_bound(m.snr, drive.tau, params.T1);
    m.overlap_error = bound.overlap_error;
    m.t1_error = bound.t1_error;
    m.epsilon_a = bound.epsilon_a;
    auto n = photon_numbers(derived, params, drive);
    m.n_g = n.g;
    m.n_e = n.e;
    return m;
}

SnrBand snr_uncertainty_band(const DeviceParams& params, const DriveSpec& drive,
                             double freq_dev, double eta_rel_dev) {
    SnrBand band;
    bool first = true;
    for (int mask = 0; mask < 16; ++mask) {
        auto p = params;
        p.g_charge += (mask & 1) ? freq_dev : -freq_dev;
        p.J += (mask & 2) ? freq_dev : -freq_dev;
        p.omega_r_bare += (mask & 4) ? freq_dev : -freq_dev;
        p.kappa_p += (mask & 8) ? freq_dev : -freq_dev;
        auto d = derive_dispersive(p);
        auto traj = integrate_eom(d, p, drive);
        const double snr = snr_integral(traj, p, drive.tau);
        const double lo = snr * (1.0 - eta_rel_dev);
        const double hi = snr * (1.0 + eta_rel_dev);
        band.lo = first ? lo : std::min(band.lo, lo);
        band.hi = first ? hi : std::max(band.hi, hi);
        first = false;
    }
    return band;
}

} // namespace readout
