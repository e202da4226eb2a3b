#pragma once

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "readout/dynamics.hpp"
#include "readout/model.hpp"

namespace readout {

struct LindbladDims {
    int n_qubit = 2;      // Kerr-oscillator qubit levels, 2 or 3
    int n_resonator = 10; // resonator Fock states
    int n_filter = 10;    // filter Fock states
};

// Master-equation model in the frame rotating at the drive frequency.
//
// The qubit number operator commutes with every retained Hamiltonian term and
// with both collapse channels, so for the product initial states used here the
// density matrix stays exactly block diagonal over qubit levels. The model
// stores one field-space Hamiltonian per qubit level; qubit-only diagonal
// energies (level frequency, anharmonicity) act as constants inside a block
// and are kept separately in sector_energy.
struct LindbladModel {
    LindbladDims dims;
    DriveSpec drive;
    double kappa_p = 0.0;
    std::optional<double> t1;         // qubit decay time; collapse off when unset

    std::array<double, 3> sector_energy{}; // qubit-only part, per level
    std::vector<Eigen::SparseMatrix<std::complex<double>>> h_sector;
    Eigen::SparseMatrix<std::complex<double>> drive_op; // f^dag + f, unit amplitude
    Eigen::SparseMatrix<std::complex<double>> a_op;
    Eigen::SparseMatrix<std::complex<double>> f_op;

    // Resonator self-Kerr per qubit state, extracted from the assembled
    // diagonals (second difference over the resonator ladder); NaN if
    // n_resonator < 3.
    double kerr_g = 0.0;
    double kerr_e = 0.0;
};

// Kerr-oscillator effective Hamiltonian of the qubit-resonator-filter chain:
// state-dependent resonator frequency and resonator-filter coupling, resonator
// self- and cross-Kerr, qubit anharmonicity, and a coherent filter drive
// amplitude*(f^dag + f) after the rotating-wave reduction.
//
// With this drive phase the master-equation field means are the negatives of
// the semiclassical fields from dynamics.hpp; comparisons flip the sign.
//
// Throws TruncationError when the semiclassical steady-state photon number
// exceeds a quarter of either Fock truncation, and std::invalid_argument for
// unsupported dims.
LindbladModel build_effective_hamiltonian(const DispersiveDerived& derived,
                                          const DeviceParams& params,
                                          const DriveSpec& drive,
                                          const LindbladDims& dims,
                                          std::optional<double> t1 = std::nullopt);

struct LindbladTrajectory {
    std::vector<double> times;
    std::vector<std::complex<double>> a_mean;
    std::vector<std::complex<double>> f_mean;
    std::vector<double> sz;     // <2 n_qubit - 1>; -1/+1 for the two-level case
    std::vector<double> purity; // tr(rho^2)

    // Diagnostics accumulated at output steps.
    double max_trace_error = 0.0;      // max |tr rho - 1|
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;       // most negative eigenvalue encountered
};

// Largest step the stability guard accepts; evolve rejects dt at or above
// this, from a crude generator norm bound.
double max_stable_dt(const LindbladModel& model);

// Fixed-step RK4 on the qubit-level blocks of the density matrix, starting
// from |initial_state> x |0> x |0> with initial_state 'g' or 'e'.
// Expectations are recorded every output_stride steps (and at t_final).
// Throws StepSizeError when dt is too coarse for the model's spectral range
// and TraceDriftError if |tr rho - 1| ever exceeds 1e-6.
LindbladTrajectory evolve(const LindbladModel& model, char initial_state,
                          double t_final, double dt, int output_stride = 10);

} // namespace readout
