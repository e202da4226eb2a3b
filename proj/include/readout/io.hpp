#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "readout/calibration.hpp"
#include "readout/dynamics.hpp"
#include "readout/lindblad.hpp"
#include "readout/normal_modes.hpp"
#include "readout/shots.hpp"
#include "readout/snr.hpp"
#include "readout/spectrum.hpp"

namespace readout {

// Writers format doubles with the shortest round-trip representation, so a
// rerun with the same inputs produces byte-identical files. Frequencies cross
// the file boundary in Hz, times in seconds; angular units stay internal.

// Columns: detuning_Hz, omega_l_g_Hz, omega_l_e_Hz, omega_h_g_Hz,
// omega_h_e_Hz, kappa_l_g_Hz, kappa_l_e_Hz, kappa_h_g_Hz, kappa_h_e_Hz,
// chi_l_Hz, chi_h_Hz. One row per detuning.
void write_modes_csv(const std::string& path, const std::vector<double>& detunings,
                     const std::vector<NormalModes>& modes);

// Columns: t_s, re_alpha_g, im_alpha_g, re_alpha_e, im_alpha_e, re_beta_g,
// im_beta_g, re_beta_e, im_beta_e. Decimated to at most max_rows rows,
// keeping the final sample.
void write_trajectory_csv(const std::string& path, const FieldTrajectory& traj,
                          std::size_t max_rows = 4096);

struct SnrSweepRow {
    double detuning = 0.0; // rad/s
    double tau = 0.0;      // s
    double n_g_over_ncrit = 0.0;
    double snr = 0.0;
    double epsilon_a_bound = 0.0;
};
// Columns: detuning_Hz, tau_s, n_g_over_ncrit, snr, epsilon_a_bound.
void write_snr_sweep_csv(const std::string& path,
                         const std::vector<SnrSweepRow>& rows);

// Columns: t_s, re_a, im_a, re_f, im_f, sz, purity.
void write_lindblad_csv(const std::string& path, const LindbladTrajectory& traj);

// Columns: I, Q, prepared.
void write_shots_csv(const std::string& path, const ShotSet& shots);

void write_shot_metrics_json(const std::string& path, const MixtureFit& fit,
                             const ShotMetrics& metrics,
                             const AssignmentErrorBound& bound);

// Two-column CSV (freq_Hz, magnitude). A non-numeric first line is treated
// as a header; any later malformed line raises ParseError naming the line.
SpectrumTrace read_trace_csv(const std::string& path, char state_label);
void write_trace_csv(const std::string& path, const SpectrumTrace& trace);

void write_fit_report_json(const std::string& path, const SpectrumFit& fit);

// Two-column CSV (power_setting, delta_ac_Hz), same header convention.
StarkDataset read_stark_csv(const std::string& path);

struct CalibrationReport {
    std::vector<double> powers;     // as given in the dataset
    std::vector<double> photons;    // inferred n_g per power
    std::vector<double> amplitudes; // fitted drive amplitudes, rad/s
};
void write_calibration_json(const std::string& path, const CalibrationReport& report);

} // namespace readout
