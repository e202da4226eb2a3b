#include "readout/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "readout/errors.hpp"

namespace readout {

namespace {

using cd = std::complex<double>;

struct ModeMatrix {
    double delta_r;  // omega_r^{g/e} - omega_d
    cd delta_p;      // omega_p - omega_d - i kappa_p/2
    double J;
};

ModeMatrix mode_matrix(const DispersiveDerived& derived, const DeviceParams& params,
                       const DriveSpec& drive, bool excited) {
    ModeMatrix m;
    m.delta_r = (excited ? derived.omega_r_e : derived.omega_r_g) - drive.omega_d;
    m.delta_p = cd(params.omega_p - drive.omega_d, -params.kappa_p / 2.0);
    m.J = excited ? derived.J_eff_e : derived.J_eff_g;
    return m;
}

ModeAmplitudes steady_one(const ModeMatrix& m, double amplitude) {
    const cd det = m.delta_r * m.delta_p - m.J * m.J;
    return {-amplitude * m.J / det, amplitude * m.delta_r / det};
}

cd closed_form_one(const ModeMatrix& m, double amplitude, double kappa_p, double t) {
    const cd tr = m.delta_r + m.delta_p;
    const cd s = std::sqrt((m.delta_r - m.delta_p) * (m.delta_r - m.delta_p)
                           + 4.0 * m.J * m.J);
    cd lo = (tr - s) / 2.0;
    cd hi = (tr + s) / 2.0;
    if (hi.real() < lo.real())
        std::swap(lo, hi);
    if (std::abs(hi - lo) < 1e-6 * kappa_p)
        throw DegenerateModeError("closed_form_response: modes degenerate");
    const cd d = hi - lo;
    const cd beta_ss = steady_one(m, amplitude).beta;
    const cd transient = amplitude * (hi - m.delta_r) / (d * hi) * std::exp(cd(0, -1) * hi * t)
                       - amplitude * (lo - m.delta_r) / (d * lo) * std::exp(cd(0, -1) * lo * t);
    return beta_ss - transient;
}

// d/dt [alpha, beta] = -i M [alpha, beta] + [0, i E env(t)]
struct Deriv {
    ModeMatrix m;
    double amplitude;

    void operator()(double env, const cd& a, const cd& b, cd& da, cd& db) const {
        da = cd(0, -1) * (m.delta_r * a + m.J * b);
        db = cd(0, -1) * (m.J * a + m.delta_p * b) + cd(0, amplitude * env);
    }
};

} // namespace

void validate(const DriveSpec& drive) {
    if (!(drive.tau > 0.0))
        throw std::invalid_argument("DriveSpec: tau must be positive");
    if (drive.duration < drive.tau)
        throw std::invalid_argument("DriveSpec: duration must cover tau");
    if (drive.sigma < 0.0)
        throw std::invalid_argument("DriveSpec: sigma must be non-negative");
}

double drive_envelope(const DriveSpec& drive, double t) {
    if (drive.envelope == Envelope::Constant)
        return t >= 0.0 ? 1.0 : 0.0;
    if (drive.sigma == 0.0)
        return (t >= 0.0 && t < drive.duration) ? 1.0 : 0.0;
    const double w = drive.sigma * std::sqrt(2.0);
    return 0.5 * (std::erf(t / w) - std::erf((t - drive.duration) / w));
}

SteadyStates steady_state(const DispersiveDerived& derived, const DeviceParams& params,
                          const DriveSpec& drive) {
    return {steady_one(mode_matrix(derived, params, drive, false), drive.amplitude),
            steady_one(mode_matrix(derived, params, drive, true), drive.amplitude)};
}

StatePair closed_form_response(const DispersiveDerived& derived,
                               const DeviceParams& params, const DriveSpec& drive,
                               double t) {
    return {closed_form_one(mode_matrix(derived, params, drive, false), drive.amplitude,
                            params.kappa_p, t),
            closed_form_one(mode_matrix(derived, params, drive, true), drive.amplitude,
                            params.kappa_p, t)};
}

FieldTrajectory integrate_eom(const DispersiveDerived& derived,
                              const DeviceParams& params, const DriveSpec& drive,
                              double dt) {
    validate(drive);
    if (!(dt > 0.0))
        throw StepSizeError("integrate_eom: dt must be positive");
    const double fastest = std::max({params.kappa_p, derived.J_eff_g, derived.J_eff_e,
                                     std::abs(derived.omega_r_g - drive.omega_d),
                                     std::abs(derived.omega_r_e - drive.omega_d),
                                     std::abs(params.omega_p - drive.omega_d)});
    if (fastest > 0.0 && dt >= 0.1 / fastest)
        throw StepSizeError("integrate_eom: dt too large for the fastest rate");

    const auto n_steps = static_cast<std::size_t>(std::ceil(drive.duration / dt - 1e-9));
    FieldTrajectory traj;
    traj.times.resize(n_steps + 1);
    traj.alpha_g.resize(n_steps + 1);
    traj.alpha_e.resize(n_steps + 1);
    traj.beta_g.resize(n_steps + 1);
    traj.beta_e.resize(n_steps + 1);

    const Deriv fg{mode_matrix(derived, params, drive, false), drive.amplitude};
    const Deriv fe{mode_matrix(derived, params, drive, true), drive.amplitude};

    auto step = [&](const Deriv& f, cd& a, cd& b, double env0, double env_half,
                    double env1) {
        cd k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b;
        f(env0, a, b, k1a, k1b);
        f(env_half, a + 0.5 * dt * k1a, b + 0.5 * dt * k1b, k2a, k2b);
        f(env_half, a + 0.5 * dt * k2a, b + 0.5 * dt * k2b, k3a, k3b);
        f(env1, a + dt * k3a, b + dt * k3b, k4a, k4b);
        a += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        b += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    };

    cd ag = 0, bg = 0, ae = 0, be = 0;
    traj.times[0] = 0.0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        const double t = i * dt;
        const double env0 = drive_envelope(drive, t);
        const double env_half = drive_envelope(drive, t + 0.5 * dt);
        const double env1 = drive_envelope(drive, t + dt);
        step(fg, ag, bg, env0, env_half, env1);
        step(fe, ae, be, env0, env_half, env1);
        traj.times[i + 1] = (i + 1) * dt;
        traj.alpha_g[i + 1] = ag;
        traj.beta_g[i + 1] = bg;
        traj.alpha_e[i + 1] = ae;
        traj.beta_e[i + 1] = be;
    }
    return traj;
}

} // namespace readout
