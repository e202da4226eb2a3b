#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "readout/dynamics.hpp"
#include "readout/model.hpp"

namespace readout {

struct MatchedWeights {
    std::vector<double> times; // grid covering [0, tau], last node at tau
    std::vector<std::complex<double>> w;
};

// Integration weights proportional to beta_e - beta_g, trapezoid-normalized so
// that the integral of |w|^2 over [0, tau] is 1.
// Throws SpanError when the trajectory does not cover [0, tau] and
// ZeroSeparationError when the two filter responses coincide.
MatchedWeights matched_weights(const FieldTrajectory& trajectory, double tau);

enum class DecayModel {
    GroundSignal, // any decay inside the window yields the ground-state mean
    Interpolated, // jump at t_d mixes the means: (t_d/tau) s_e + (1 - t_d/tau) s_g
};

struct ShotRecord {
    double i = 0.0;
    double q = 0.0;
    char prepared = 'g';
};

struct ShotSet {
    std::vector<ShotRecord> records; // ground block first, then excited
    std::size_t n_shots_per_state = 0;
    double tau = 0.0;
    std::uint64_t seed = 0;
};

struct ShotOptions {
    bool t1_enabled = true;
    DecayModel decay_model = DecayModel::GroundSignal;
    double sigma_g_scale = 1.0; // pointer-cloud broadening of the ground state
};

// Monte-Carlo IQ records: each shot integrates the matched-filtered trajectory
// for its prepared state and adds isotropic Gaussian noise sized so the
// noiseless ensemble reproduces the trajectory's SNR integral. Excited-state
// shots optionally draw an exponential decay time against params.T1.
// Bit-reproducible for a fixed seed.
ShotSet sample_shots(const FieldTrajectory& trajectory, const DeviceParams& params,
                     double tau, std::size_t n_shots_per_state, std::uint64_t seed,
                     const ShotOptions& opts = {});

struct MixtureFit {
    std::complex<double> mu_g, mu_e;
    Eigen::Matrix2d cov_g = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d cov_e = Eigen::Matrix2d::Zero();
    double sigma_g = 0.0, sigma_e = 0.0; // radius sqrt((S_xx + S_yy)/2)
    double weight_g = 0.0, weight_e = 0.0;
    // Equal-posterior point along the inter-mean axis (descriptor only;
    // assignment uses the full two-dimensional likelihoods).
    double assignment_threshold = 0.0;
    int iterations = 0;
    double log_likelihood = 0.0;
};

// Unsupervised two-component Gaussian EM on the IQ records. Preparation labels
// only decide which fitted component is reported as g. Initialization splits
// the records at the median of the principal-axis projection. Stops when the
// log-likelihood changes by < 1e-9 per shot or after 500 iterations.
// Throws std::invalid_argument for < 100 shots per label and
// DegenerateComponentError when a component weight falls below 1e-3.
MixtureFit fit_mixture(const ShotSet& shots);

struct ShotMetrics {
    double snr = 0.0; // power convention, width taken along the inter-mean axis
    double epsilon_a = 0.0;
    double p_e_given_g = 0.0;
    double p_g_given_e = 0.0;
};

// Confusion probabilities from maximum-likelihood assignment of every record
// against its preparation label; epsilon_a is their average.
ShotMetrics extract_metrics(const MixtureFit& fit, const ShotSet& shots);

} // namespace readout
