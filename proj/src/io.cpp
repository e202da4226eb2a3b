#include "readout/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <nlohmann/json.hpp>

#include "readout/errors.hpp"
#include "readout/units.hpp"

namespace readout {
namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc())
        throw std::runtime_error("number formatting failed");
    out.append(buf, end);
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for writing: " + path);
    f.write(contents.data(), std::streamsize(contents.size()));
    if (!f)
        throw std::runtime_error("short write: " + path);
}

// Splits a CSV line into exactly `want` doubles. Returns false on a line
// that parses as nothing numeric (header candidate).
bool parse_row(const std::string& line, std::size_t want, std::vector<double>& out,
               const std::string& path, std::size_t lineno) {
    out.clear();
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        std::string_view field(line.data() + pos,
                               (comma == std::string::npos ? line.size() : comma) - pos);
        while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front())))
            field.remove_prefix(1);
        while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back())))
            field.remove_suffix(1);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size()) {
            if (out.empty() && lineno == 1)
                return false; // header line
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected a number, got '" + std::string(field) + "'");
        }
        out.push_back(v);
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (out.size() != want)
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(want) + " columns, got " +
                         std::to_string(out.size()));
    return true;
}

std::vector<std::vector<double>> read_csv(const std::string& path, std::size_t want) {
    std::ifstream f(path);
    if (!f)
        throw ParseError("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::vector<double> row;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (parse_row(line, want, row, path, lineno))
            rows.push_back(row);
    }
    return rows;
}

void dump_json(const std::string& path, const nlohmann::json& j) {
    write_file(path, j.dump(2) + "\n");
}

} // namespace

void write_modes_csv(const std::string& path, const std::vector<double>& detunings,
                     const std::vector<NormalModes>& modes) {
    if (detunings.size() != modes.size())
        throw std::invalid_argument("write_modes_csv: size mismatch");
    std::string out =
        "detuning_Hz,omega_l_g_Hz,omega_l_e_Hz,omega_h_g_Hz,omega_h_e_Hz,"
        "kappa_l_g_Hz,kappa_l_e_Hz,kappa_h_g_Hz,kappa_h_e_Hz,chi_l_Hz,chi_h_Hz\n";
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const NormalModes& m = modes[i];
        const double cols[11] = {
            rad_to_hz(detunings[i]),  rad_to_hz(m.omega_l_g), rad_to_hz(m.omega_l_e),
            rad_to_hz(m.omega_h_g),   rad_to_hz(m.omega_h_e), rad_to_hz(m.kappa_l_g),
            rad_to_hz(m.kappa_l_e),   rad_to_hz(m.kappa_h_g), rad_to_hz(m.kappa_h_e),
            rad_to_hz(m.chi_l),       rad_to_hz(m.chi_h)};
        for (int c = 0; c < 11; ++c) {
            if (c) out.push_back(',');
            append_double(out, cols[c]);
        }
        out.push_back('\n');
    }
    write_file(path, out);
}

void write_trajectory_csv(const std::string& path, const FieldTrajectory& traj,
                          std::size_t max_rows) {
    if (max_rows < 2)
        throw std::invalid_argument("write_trajectory_csv: max_rows < 2");
    const std::size_t n = traj.times.size();
    const std::size_t stride = n <= max_rows ? 1 : (n + max_rows - 1) / max_rows;
    std::string out =
        "t_s,re_alpha_g,im_alpha_g,re_alpha_e,im_alpha_e,"
        "re_beta_g,im_beta_g,re_beta_e,im_beta_e\n";
    for (std::size_t i = 0; i < n; i += stride) {
        const std::size_t k = (i + stride < n) ? i : n - 1; // always end on the last sample
        const double cols[9] = {traj.times[k],
                                traj.alpha_g[k].real(), traj.alpha_g[k].imag(),
                                traj.alpha_e[k].real(), traj.alpha_e[k].imag(),
                                traj.beta_g[k].real(),  traj.beta_g[k].imag(),
                                traj.beta_e[k].real(),  traj.beta_e[k].imag()};
        for (int c = 0; c < 9; ++c) {
            if (c) out.push_back(',');
            append_double(out, cols[c]);
        }
        out.push_back('\n');
    }
    write_file(path, out);
}

void write_snr_sweep_csv(const std::string& path,
                         const std::vector<SnrSweepRow>& rows) {
    std::string out = "detuning_Hz,tau_s,n_g_over_ncrit,snr,epsilon_a_bound\n";
    for (const SnrSweepRow& r : rows) {
        append_double(out, rad_to_hz(r.detuning));
        out.push_back(',');
        append_double(out, r.tau);
        out.push_back(',');
        append_double(out, r.n_g_over_ncrit);
        out.push_back(',');
        append_double(out, r.snr);
        out.push_back(',');
        append_double(out, r.epsilon_a_bound);
        out.push_back('\n');
    }
    write_file(path, out);
}

void write_lindblad_csv(const std::string& path, const LindbladTrajectory& traj) {
    std::string out = "t_s,re_a,im_a,re_f,im_f,sz,purity\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double cols[7] = {traj.times[i],
                                traj.a_mean[i].real(), traj.a_mean[i].imag(),
                                traj.f_mean[i].real(), traj.f_mean[i].imag(),
                                traj.sz[i], traj.purity[i]};
        for (int c = 0; c < 7; ++c) {
            if (c) out.push_back(',');
            append_double(out, cols[c]);
        }
        out.push_back('\n');
    }
    write_file(path, out);
}

void write_shots_csv(const std::string& path, const ShotSet& shots) {
    std::string out = "I,Q,prepared\n";
    for (const ShotRecord& r : shots.records) {
        append_double(out, r.i);
        out.push_back(',');
        append_double(out, r.q);
        out.push_back(',');
        out.push_back(r.prepared);
        out.push_back('\n');
    }
    write_file(path, out);
}

void write_shot_metrics_json(const std::string& path, const MixtureFit& fit,
                             const ShotMetrics& metrics,
                             const AssignmentErrorBound& bound) {
    nlohmann::json j;
    j["snr"] = metrics.snr;
    j["epsilon_a"] = metrics.epsilon_a;
    j["p_e_given_g"] = metrics.p_e_given_g;
    j["p_g_given_e"] = metrics.p_g_given_e;
    j["mu_g"] = {fit.mu_g.real(), fit.mu_g.imag()};
    j["mu_e"] = {fit.mu_e.real(), fit.mu_e.imag()};
    j["sigma_g"] = fit.sigma_g;
    j["sigma_e"] = fit.sigma_e;
    j["weight_g"] = fit.weight_g;
    j["weight_e"] = fit.weight_e;
    j["assignment_threshold"] = fit.assignment_threshold;
    j["fit_iterations"] = fit.iterations;
    j["bound"] = {{"overlap_error", bound.overlap_error},
                  {"t1_error", bound.t1_error},
                  {"epsilon_a", bound.epsilon_a}};
    dump_json(path, j);
}

SpectrumTrace read_trace_csv(const std::string& path, char state_label) {
    SpectrumTrace t;
    t.state_label = state_label;
    for (const auto& row : read_csv(path, 2)) {
        t.freqs.push_back(hz_to_rad(row[0]));
        t.magnitudes.push_back(row[1]);
    }
    return t;
}

void write_trace_csv(const std::string& path, const SpectrumTrace& trace) {
    std::string out = "freq_Hz,magnitude\n";
    for (std::size_t i = 0; i < trace.freqs.size(); ++i) {
        append_double(out, rad_to_hz(trace.freqs[i]));
        out.push_back(',');
        append_double(out, trace.magnitudes[i]);
        out.push_back('\n');
    }
    write_file(path, out);
}

void write_fit_report_json(const std::string& path, const SpectrumFit& fit) {
    // Covariance order: A, k, omega_0, phi, kappa_p, J, omega_p, omega_r_g,
    // omega_r_e. Frequencies are reported in Hz, the tilt slope per Hz.
    auto sigma = [&](int idx) {
        const double v = fit.covariance(idx, idx);
        return v > 0.0 ? std::sqrt(v) : 0.0;
    };
    nlohmann::json j;
    j["params"] = {{"A", fit.model.A},
                   {"k_per_Hz", fit.model.k * 2.0 * M_PI},
                   {"omega_0_Hz", rad_to_hz(fit.model.omega_0)},
                   {"phi_rad", fit.model.phi},
                   {"kappa_p_Hz", rad_to_hz(fit.model.kappa_p)},
                   {"J_Hz", rad_to_hz(fit.model.J)},
                   {"omega_p_Hz", rad_to_hz(fit.model.omega_p)},
                   {"omega_r_g_Hz", rad_to_hz(fit.model.omega_r_g)},
                   {"omega_r_e_Hz", rad_to_hz(fit.model.omega_r_e)}};
    j["sigma"] = {{"A", sigma(0)},
                  {"k_per_Hz", sigma(1) * 2.0 * M_PI},
                  {"omega_0_Hz", rad_to_hz(sigma(2))},
                  {"phi_rad", sigma(3)},
                  {"kappa_p_Hz", rad_to_hz(sigma(4))},
                  {"J_Hz", rad_to_hz(sigma(5))},
                  {"omega_p_Hz", rad_to_hz(sigma(6))},
                  {"omega_r_g_Hz", rad_to_hz(sigma(7))},
                  {"omega_r_e_Hz", rad_to_hz(sigma(8))}};
    j["residual_norm"] = fit.residual_norm;
    j["iterations"] = fit.iterations;
    j["condition_number"] = fit.condition_number;
    j["identifiable"] = fit.identifiable;
    dump_json(path, j);
}

StarkDataset read_stark_csv(const std::string& path) {
    StarkDataset d;
    for (const auto& row : read_csv(path, 2)) {
        d.powers.push_back(row[0]);
        d.shifts.push_back(hz_to_rad(row[1]));
    }
    return d;
}

void write_calibration_json(const std::string& path, const CalibrationReport& report) {
    if (report.powers.size() != report.photons.size() ||
        report.powers.size() != report.amplitudes.size())
        throw std::invalid_argument("write_calibration_json: size mismatch");
    nlohmann::json j;
    j["powers"] = report.powers;
    j["photons"] = report.photons;
    nlohmann::json amps = nlohmann::json::array();
    for (double a : report.amplitudes)
        amps.push_back(rad_to_hz(a));
    j["amplitudes_Hz"] = amps;
    dump_json(path, j);
}

} // namespace readout
