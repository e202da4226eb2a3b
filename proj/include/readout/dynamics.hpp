#pragma once

#include <complex>
#include <vector>

#include "readout/model.hpp"

namespace readout {

enum class Envelope {
    Constant,     // unit envelope for all t >= 0
    FilteredRect, // rectangle [0, duration] convolved with a Gaussian of width sigma
};

struct DriveSpec {
    double omega_d = 0.0;      // rad/s
    double amplitude = 0.0;    // field amplitude E, rad/s
    Envelope envelope = Envelope::FilteredRect;
    double sigma = 0.5e-9;     // s
    double duration = 450e-9;  // s
    double tau = 100e-9;       // s, integration window; duration >= tau > 0
};

// Throws std::invalid_argument on duration < tau, tau <= 0, or sigma < 0.
void validate(const DriveSpec& drive);

// Envelope value in [0, 1]. The filtered rectangle is the analytic
// erf ramp (step convolved with a Gaussian), so it is grid-independent.
double drive_envelope(const DriveSpec& drive, double t);

struct ModeAmplitudes {
    std::complex<double> alpha; // resonator field
    std::complex<double> beta;  // filter field
};

struct SteadyStates {
    ModeAmplitudes g, e;
};

// Constant-drive steady state in the frame rotating at omega_d:
// (alpha_ss, beta_ss) = E/(Delta_r(Delta_p - i kappa_p/2) - J^2) * (-J, Delta_r).
SteadyStates steady_state(const DispersiveDerived& derived, const DeviceParams& params,
                          const DriveSpec& drive);

struct StatePair {
    std::complex<double> g, e;
};

// Filter response beta(t) for a constant drive switched on at t = 0, from the
// eigenprojector decomposition of the rotating-frame mode matrix.
// Throws DegenerateModeError when |lambda_l - lambda_h| < 1e-6 kappa_p.
StatePair closed_form_response(const DispersiveDerived& derived,
                               const DeviceParams& params, const DriveSpec& drive,
                               double t);

struct FieldTrajectory {
    std::vector<double> times; // s, uniform grid starting at 0
    std::vector<std::complex<double>> alpha_g, alpha_e, beta_g, beta_e;
};

// Fixed-step RK4 over [0, duration] for both qubit states, vacuum start.
// Throws StepSizeError if dt >= 0.1/max(kappa_p, J, |detunings|).
FieldTrajectory integrate_eom(const DispersiveDerived& derived,
                              const DeviceParams& params, const DriveSpec& drive,
                              double dt = 0.05e-9);

} // namespace readout
