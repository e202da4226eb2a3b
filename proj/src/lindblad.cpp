#include "readout/lindblad.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "readout/errors.hpp"

namespace readout {

namespace {

using cd = std::complex<double>;
using Sparse = Eigen::SparseMatrix<cd>;
using Dense = Eigen::MatrixXcd;

struct FieldBasis {
    int n_r, n_f;
    int size() const { return n_r * n_f; }
    int idx(int nr, int nf) const { return nr * n_f + nf; }
};

Sparse field_lowering_a(const FieldBasis& b) {
    std::vector<Eigen::Triplet<cd>> t;
    for (int nr = 1; nr < b.n_r; ++nr)
        for (int nf = 0; nf < b.n_f; ++nf)
            t.emplace_back(b.idx(nr - 1, nf), b.idx(nr, nf), std::sqrt(double(nr)));
    Sparse m(b.size(), b.size());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

Sparse field_lowering_f(const FieldBasis& b) {
    std::vector<Eigen::Triplet<cd>> t;
    for (int nr = 0; nr < b.n_r; ++nr)
        for (int nf = 1; nf < b.n_f; ++nf)
            t.emplace_back(b.idx(nr, nf - 1), b.idx(nr, nf), std::sqrt(double(nf)));
    Sparse m(b.size(), b.size());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

double sparse_inf_norm(const Sparse& m) {
    Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(m.rows());
    for (int k = 0; k < m.outerSize(); ++k)
        for (Sparse::InnerIterator it(m, k); it; ++it)
            row_sum[it.row()] += std::abs(it.value());
    return row_sum.size() ? row_sum.maxCoeff() : 0.0;
}

// tr(A rho) for sparse A
cd trace_product(const Sparse& a, const Dense& rho) {
    cd s = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (Sparse::InnerIterator it(a, k); it; ++it)
            s += it.value() * rho(it.col(), it.row());
    return s;
}

} // namespace

LindbladModel build_effective_hamiltonian(const DispersiveDerived& derived,
                                          const DeviceParams& params,
                                          const DriveSpec& drive,
                                          const LindbladDims& dims,
                                          std::optional<double> t1) {
    if (dims.n_qubit != 2 && dims.n_qubit != 3)
        throw std::invalid_argument("build_effective_hamiltonian: n_qubit must be 2 or 3");
    if (dims.n_resonator < 2 || dims.n_filter < 2)
        throw std::invalid_argument("build_effective_hamiltonian: Fock truncations must be >= 2");
    if (t1 && *t1 <= 0.0)
        throw std::invalid_argument("build_effective_hamiltonian: t1 must be positive");
    validate(drive);

    // Fock headroom against the constant-drive steady state at full amplitude.
    const SteadyStates ss = steady_state(derived, params, drive);
    const double n_r_exp = std::max(std::norm(ss.g.alpha), std::norm(ss.e.alpha));
    const double n_f_exp = std::max(std::norm(ss.g.beta), std::norm(ss.e.beta));
    if (n_r_exp > dims.n_resonator / 4.0)
        throw TruncationError("resonator truncation " + std::to_string(dims.n_resonator) +
                              " too small for expected photon number " +
                              std::to_string(n_r_exp));
    if (n_f_exp > dims.n_filter / 4.0)
        throw TruncationError("filter truncation " + std::to_string(dims.n_filter) +
                              " too small for expected photon number " +
                              std::to_string(n_f_exp));

    const FieldBasis basis{dims.n_resonator, dims.n_filter};

    LindbladModel model;
    model.dims = dims;
    model.drive = drive;
    model.kappa_p = params.kappa_p;
    model.t1 = t1;
    model.a_op = field_lowering_a(basis);
    model.f_op = field_lowering_f(basis);
    {
        Sparse fd = model.f_op.adjoint();
        model.drive_op = fd + model.f_op;
    }

    // Qubit-only energies: Lamb-shifted level frequency plus anharmonicity.
    // These commute with everything kept here, so they never enter the blocks.
    const double omega_q_bar =
        params.omega_q + params.g_charge * params.g_charge / derived.delta_qr;
    for (int k = 0; k < dims.n_qubit; ++k)
        model.sector_energy[k] =
            omega_q_bar * k - 0.5 * params.alpha * k * (k - 1);

    // Per-level field Hamiltonian in the drive frame. The qubit level k sets
    // the resonator frequency, the resonator-filter coupling, and the
    // resonator Kerr, each linear in k.
    const double d_omega_r = derived.omega_r_e - derived.omega_r_g;
    const double d_j = derived.J_eff_e - derived.J_eff_g;
    const double lam = derived.lambda;
    const double kerr_base = -0.5 * params.E_c * lam * lam * lam * lam;
    const double kerr_cross =
        -2.0 * derived.lambda_prime * lam * lam * lam * params.E_c;

    model.h_sector.reserve(dims.n_qubit);
    for (int k = 0; k < dims.n_qubit; ++k) {
        const double omega_r_k = derived.omega_r_g + k * d_omega_r - drive.omega_d;
        const double omega_p_k = params.omega_p - drive.omega_d;
        const double j_k = derived.J_eff_g + k * d_j;
        const double kerr_k = kerr_base + k * kerr_cross;

        std::vector<Eigen::Triplet<cd>> t;
        for (int nr = 0; nr < basis.n_r; ++nr)
            for (int nf = 0; nf < basis.n_f; ++nf) {
                const double diag = omega_r_k * nr + omega_p_k * nf +
                                    kerr_k * nr * (nr - 1);
                if (diag != 0.0)
                    t.emplace_back(basis.idx(nr, nf), basis.idx(nr, nf), diag);
                // a^dag f and its conjugate
                if (j_k != 0.0 && nr + 1 < basis.n_r && nf >= 1) {
                    const double v = j_k * std::sqrt(double((nr + 1) * nf));
                    t.emplace_back(basis.idx(nr + 1, nf - 1), basis.idx(nr, nf), v);
                    t.emplace_back(basis.idx(nr, nf), basis.idx(nr + 1, nf - 1), v);
                }
            }
        Sparse h(basis.size(), basis.size());
        h.setFromTriplets(t.begin(), t.end());
        model.h_sector.push_back(std::move(h));
    }

    // Kerr read back from the assembled diagonals: second difference of the
    // resonator ladder at filter vacuum is 2K.
    auto extract_kerr = [&](const Sparse& h) {
        if (basis.n_r < 3)
            return std::numeric_limits<double>::quiet_NaN();
        const double e0 = h.coeff(basis.idx(0, 0), basis.idx(0, 0)).real();
        const double e1 = h.coeff(basis.idx(1, 0), basis.idx(1, 0)).real();
        const double e2 = h.coeff(basis.idx(2, 0), basis.idx(2, 0)).real();
        return 0.5 * (e2 - 2.0 * e1 + e0);
    };
    model.kerr_g = extract_kerr(model.h_sector[0]);
    model.kerr_e = extract_kerr(model.h_sector[1]);
    return model;
}

namespace {

using Blocks = std::vector<Dense>;

struct DerivWorkspace {
    Sparse f_dag;
    std::vector<int> active; // qubit levels that can acquire population
};

// d rho_k/dt for the active qubit-level blocks; valid for Hermitian blocks.
void lindblad_deriv(const LindbladModel& model, const DerivWorkspace& ws,
                    const Blocks& rho, double t, Blocks& out) {
    const double amp = model.drive.amplitude * drive_envelope(model.drive, t);
    for (int k : ws.active) {
        Dense hrho = model.h_sector[k] * rho[k];
        if (amp != 0.0)
            hrho.noalias() += amp * (model.drive_op * rho[k]);
        out[k] = cd(0.0, -1.0) * (hrho - hrho.adjoint());

        Dense frho = model.f_op * rho[k];
        Dense nfrho = ws.f_dag * frho;
        out[k].noalias() += model.kappa_p * (frho * ws.f_dag);
        out[k] -= (0.5 * model.kappa_p) * (nfrho + nfrho.adjoint());
    }
    if (model.t1) {
        const double g1 = 1.0 / *model.t1;
        for (int k : ws.active) {
            if (k > 0)
                out[k] -= (g1 * k) * rho[k];
            if (k + 1 <= ws.active.back())
                out[k] += (g1 * (k + 1)) * rho[k + 1];
        }
    }
}

} // namespace

double max_stable_dt(const LindbladModel& model) {
    // Crude generator bound; RK4 needs dt well inside 1/|L|.
    double h_norm = 0.0;
    for (const auto& h : model.h_sector)
        h_norm = std::max(h_norm, sparse_inf_norm(h));
    h_norm += std::abs(model.drive.amplitude) * sparse_inf_norm(model.drive_op);
    double l_norm = 2.0 * h_norm + 2.0 * model.kappa_p * model.dims.n_filter;
    if (model.t1)
        l_norm += 2.0 * model.dims.n_qubit / *model.t1;
    return 1.0 / l_norm;
}

LindbladTrajectory evolve(const LindbladModel& model, char initial_state,
                          double t_final, double dt, int output_stride) {
    if (initial_state != 'g' && initial_state != 'e')
        throw std::invalid_argument("evolve: initial_state must be 'g' or 'e'");
    if (t_final <= 0.0 || dt <= 0.0)
        throw std::invalid_argument("evolve: t_final and dt must be positive");
    if (output_stride < 1)
        throw std::invalid_argument("evolve: output_stride must be >= 1");

    const double dt_max = max_stable_dt(model);
    if (dt >= dt_max) {
        char msg[96];
        std::snprintf(msg, sizeof msg, "evolve: dt %.3e too coarse; need dt < %.3e",
                      dt, dt_max);
        throw StepSizeError(msg);
    }

    const int n_q = model.dims.n_qubit;
    const int n = model.dims.n_resonator * model.dims.n_filter;
    const int k0 = initial_state == 'e' ? 1 : 0;
    Blocks rho(n_q, Dense::Zero(n, n));
    rho[k0](0, 0) = 1.0;

    DerivWorkspace ws;
    ws.f_dag = model.f_op.adjoint();
    // Qubit decay only moves population downward, so levels above the initial
    // one never populate; without decay the initial level is the only one.
    if (model.t1)
        for (int k = 0; k <= k0; ++k)
            ws.active.push_back(k);
    else
        ws.active.push_back(k0);

    const long n_steps = std::max<long>(1, std::lround(std::ceil(t_final / dt - 1e-9)));

    LindbladTrajectory traj;
    Eigen::SelfAdjointEigenSolver<Dense> eig;
    auto record = [&](long step) {
        const double t = step * dt;
        double trace = 0.0, sz = 0.0, purity = 0.0;
        cd a_mean = 0.0, f_mean = 0.0;
        for (int k : ws.active) {
            const double w = rho[k].trace().real();
            trace += w;
            sz += (2.0 * k - 1.0) * w;
            purity += rho[k].squaredNorm(); // tr(rho^2) for Hermitian blocks
            a_mean += trace_product(model.a_op, rho[k]);
            f_mean += trace_product(model.f_op, rho[k]);
            traj.max_hermiticity_error =
                std::max(traj.max_hermiticity_error,
                         (rho[k] - rho[k].adjoint()).cwiseAbs().maxCoeff());
            eig.compute(rho[k], Eigen::EigenvaluesOnly);
            traj.min_eigenvalue = std::min(traj.min_eigenvalue,
                                           eig.eigenvalues().minCoeff());
        }
        const double drift = std::abs(trace - 1.0);
        traj.max_trace_error = std::max(traj.max_trace_error, drift);
        if (drift > 1e-6)
            throw TraceDriftError("evolve: trace drift " + std::to_string(drift) +
                                  " at t = " + std::to_string(t));
        traj.times.push_back(t);
        traj.a_mean.push_back(a_mean);
        traj.f_mean.push_back(f_mean);
        traj.sz.push_back(sz);
        traj.purity.push_back(purity);
    };

    record(0);
    Blocks k1(n_q, Dense(n, n)), k2(n_q, Dense(n, n)), k3(n_q, Dense(n, n)),
        k4(n_q, Dense(n, n)), stage(n_q, Dense(n, n));
    for (long step = 0; step < n_steps; ++step) {
        const double t = step * dt;
        lindblad_deriv(model, ws, rho, t, k1);
        for (int k : ws.active)
            stage[k] = rho[k] + (0.5 * dt) * k1[k];
        lindblad_deriv(model, ws, stage, t + 0.5 * dt, k2);
        for (int k : ws.active)
            stage[k] = rho[k] + (0.5 * dt) * k2[k];
        lindblad_deriv(model, ws, stage, t + 0.5 * dt, k3);
        for (int k : ws.active)
            stage[k] = rho[k] + dt * k3[k];
        lindblad_deriv(model, ws, stage, t + dt, k4);
        for (int k : ws.active)
            rho[k] += (dt / 6.0) * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        if ((step + 1) % output_stride == 0 || step + 1 == n_steps)
            record(step + 1);
    }
    return traj;
}

} // namespace readout
