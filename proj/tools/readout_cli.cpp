#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <optional>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "readout/calibration.hpp"
#include "readout/errors.hpp"
#include "readout/io.hpp"
#include "readout/lindblad.hpp"
#include "readout/normal_modes.hpp"
#include "readout/shots.hpp"
#include "readout/snr.hpp"
#include "readout/spectrum.hpp"
#include "readout/units.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace readout;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grid points are pulled by a shared counter and stored by index, so the
// assembled output is in grid order no matter how the pool schedules.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (n == 0)
        return;
    int t = threads > 0 ? threads : int(std::thread::hardware_concurrency());
    t = std::max(1, std::min<int>(t, int(n)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                next.store(n); // drain remaining work
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(t));
    for (int k = 0; k < t; ++k)
        pool.emplace_back(work);
    for (auto& th : pool)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

const json& require_key(const json& j, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end())
        throw UsageError("missing config key: " + key);
    return *it;
}

double require_number(const json& j, const std::string& key) {
    const json& v = require_key(j, key);
    if (!v.is_number())
        throw UsageError("config key is not a number: " + key);
    return v.get<double>();
}

std::vector<double> require_grid(const json& j, const std::string& key) {
    const json& v = require_key(j, key);
    if (!v.is_array() || v.empty())
        throw UsageError("config key must be a non-empty array: " + key);
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number())
            throw UsageError("non-numeric entry in grid: " + key);
        out.push_back(e.get<double>());
    }
    return out;
}

double number_or(const json& j, const std::string& key, double fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<double>();
}

bool flag_or(const json& j, const std::string& key, bool fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<bool>();
}

DeviceParams load_device(const json& cfg) {
    return load_device_params(require_key(cfg, "device").get<std::string>());
}

// Detuning sweeps move the qubit (flux tuning); the resonator stays put.
DeviceParams at_detuning(DeviceParams p, double detuning_rad) {
    p.omega_q = p.omega_r_bare + detuning_rad;
    return p;
}

DriveSpec drive_from_config(const json& block) {
    DriveSpec d;
    d.omega_d = hz_to_rad(require_number(block, "omega_d_Hz"));
    d.amplitude = hz_to_rad(require_number(block, "amplitude_Hz"));
    const std::string env = block.value("envelope", std::string("filtered_rect"));
    if (env == "filtered_rect")
        d.envelope = Envelope::FilteredRect;
    else if (env == "constant")
        d.envelope = Envelope::Constant;
    else
        throw UsageError("unknown envelope: " + env);
    d.sigma = number_or(block, "sigma_s", d.sigma);
    d.duration = number_or(block, "duration_s", d.duration);
    d.tau = number_or(block, "tau_s", d.tau);
    return d;
}

int threads_from(const json& cfg) {
    auto it = cfg.find("threads");
    return it == cfg.end() ? 0 : it->get<int>();
}

void write_config_echo(const fs::path& out_dir, const json& cfg) {
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "config-echo.json", std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write config echo in " + out_dir.string());
    f << cfg.dump(2) << "\n";
}

int cmd_modes(const json& cfg, const fs::path& out_dir) {
    const json& block = require_key(cfg, "modes");
    auto grid = require_grid(block, "detunings_Hz");
    const DeviceParams base = load_device(cfg);

    std::vector<double> detunings(grid.size());
    std::vector<NormalModes> modes(grid.size());
    parallel_for(grid.size(), threads_from(cfg), [&](std::size_t i) {
        const double det = hz_to_rad(grid[i]);
        const DeviceParams p = at_detuning(base, det);
        detunings[i] = det;
        modes[i] = exact_modes(derive_dispersive(p), p);
    });
    write_modes_csv((out_dir / "modes.csv").string(), detunings, modes);
    return 0;
}

int cmd_snr(const json& cfg, const fs::path& out_dir) {
    const json& block = require_key(cfg, "snr");
    auto detunings = require_grid(block, "detunings_Hz");
    auto taus = require_grid(block, "taus_s");
    auto powers = require_grid(block, "n_over_ncrit");
    const double window = hz_to_rad(number_or(block, "window_Hz", 25e6));
    const double duration = number_or(block, "duration_s", 450e-9);
    const DeviceParams base = load_device(cfg);

    struct Point {
        double detuning, tau, power;
    };
    std::vector<Point> grid;
    for (double det : detunings)
        for (double tau : taus)
            for (double power : powers)
                grid.push_back({hz_to_rad(det), tau, power});

    std::vector<SnrSweepRow> rows(grid.size());
    parallel_for(grid.size(), threads_from(cfg), [&](std::size_t i) {
        const Point& pt = grid[i];
        const DeviceParams p = at_detuning(base, pt.detuning);
        const auto d = derive_dispersive(p);
        const auto nm = exact_modes(d, p);
        const double lo = std::min(nm.omega_l_g, nm.omega_l_e) - window;
        const double hi = std::max(nm.omega_l_g, nm.omega_l_e) + window;
        const double ncrit = n_crit(p, d);

        DriveSpec drive;
        drive.omega_d = optimal_drive_frequency(d, p, lo, hi);
        drive.amplitude =
            drive_amplitude_from_photons(pt.power * ncrit, d, p, drive.omega_d);
        drive.tau = pt.tau;
        drive.duration = std::max(duration, pt.tau + 50e-9);

        const auto met = evaluate_readout(d, p, drive, lo, hi);
        rows[i] = {pt.detuning, pt.tau, met.n_g / ncrit, met.snr, met.epsilon_a};
    });
    write_snr_sweep_csv((out_dir / "snr_sweep.csv").string(), rows);
    return 0;
}

int cmd_shots(const json& cfg, const fs::path& out_dir) {
    const json& block = require_key(cfg, "shots");
    const DeviceParams p = load_device(cfg);
    const auto d = derive_dispersive(p);

    DriveSpec drive = drive_from_config(block);
    const double tau = drive.tau;
    const auto n_shots = require_key(block, "n_shots").get<std::int64_t>();
    if (n_shots <= 0)
        throw UsageError("shots.n_shots must be positive");
    const auto seed = cfg.value("seed", std::uint64_t{1});

    ShotOptions opts;
    opts.t1_enabled = flag_or(block, "t1_enabled", true);
    opts.sigma_g_scale = number_or(block, "sigma_g_scale", 1.0);

    const auto traj = integrate_eom(d, p, drive);
    const auto shots =
        sample_shots(traj, p, tau, std::size_t(n_shots), seed, opts);
    const auto fit = fit_mixture(shots);
    const auto metrics = extract_metrics(fit, shots);
    const auto bound =
        assignment_error_bound(snr_integral(traj, p, tau), tau, p.T1);

    write_shots_csv((out_dir / "shots.csv").string(), shots);
    write_shot_metrics_json((out_dir / "metrics.json").string(), fit, metrics,
                            bound);
    return 0;
}

int cmd_fit(const json& cfg, const fs::path& out_dir) {
    const json& block = require_key(cfg, "fit");
    const auto trace_g = read_trace_csv(
        require_key(block, "trace_g").get<std::string>(), 'g');
    const auto trace_e = read_trace_csv(
        require_key(block, "trace_e").get<std::string>(), 'e');

    const auto initial = initial_model_from_traces(trace_g, trace_e);
    const auto fit = fit_spectrum(trace_g, trace_e, initial);
    write_fit_report_json((out_dir / "fit_report.json").string(), fit);

    // Normal-mode observables of the fitted pair, for direct comparison with
    // the device table.
    DeviceParams pf;
    pf.omega_p = fit.model.omega_p;
    pf.kappa_p = fit.model.kappa_p;
    pf.J = fit.model.J;
    DispersiveDerived df;
    df.omega_r_g = fit.model.omega_r_g;
    df.omega_r_e = fit.model.omega_r_e;
    df.J_eff_g = fit.model.J;
    df.J_eff_e = fit.model.J;
    const auto nm = exact_modes(df, pf);
    json j;
    j["chi_l_Hz"] = rad_to_hz(nm.chi_l);
    j["chi_h_Hz"] = rad_to_hz(nm.chi_h);
    j["kappa_l_g_Hz"] = rad_to_hz(nm.kappa_l_g);
    j["kappa_l_e_Hz"] = rad_to_hz(nm.kappa_l_e);
    j["kappa_h_g_Hz"] = rad_to_hz(nm.kappa_h_g);
    j["kappa_h_e_Hz"] = rad_to_hz(nm.kappa_h_e);
    std::ofstream f(out_dir / "fit_modes.json", std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write fit_modes.json");
    f << j.dump(2) << "\n";
    return 0;
}

int cmd_lindblad(const json& cfg, const fs::path& out_dir) {
    const json& block = require_key(cfg, "lindblad");
    const DeviceParams p = load_device(cfg);
    const auto d = derive_dispersive(p);
    DriveSpec drive = drive_from_config(block);

    LindbladDims dims;
    dims.n_qubit = int(number_or(block, "n_qubit", 2));
    dims.n_resonator = int(number_or(block, "n_resonator", 10));
    dims.n_filter = int(number_or(block, "n_filter", 10));

    const double t_final = number_or(block, "t_final_s", drive.duration);
    const double dt = number_or(block, "dt_s", 0.05e-9);
    const int stride = int(number_or(block, "output_stride", 10));
    std::optional<double> t1;
    if (flag_or(block, "t1_enabled", false))
        t1 = p.T1;

    const auto model = build_effective_hamiltonian(d, p, drive, dims, t1);
    const auto semicl = integrate_eom(d, p, drive, dt);

    // Master-equation fields carry the opposite sign of the semiclassical
    // convention; compare <f> against -beta.
    auto deviation = [&](const LindbladTrajectory& traj, bool excited) {
        double worst = 0.0, scale = 0.0;
        for (const auto& b : (excited ? semicl.beta_e : semicl.beta_g))
            scale = std::max(scale, std::abs(b));
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const auto k = std::size_t(std::llround(traj.times[i] / dt));
            if (k >= semicl.times.size())
                break;
            const auto beta = excited ? semicl.beta_e[k] : semicl.beta_g[k];
            worst = std::max(worst, std::abs(traj.f_mean[i] + beta));
        }
        return scale > 0.0 ? worst / scale : worst;
    };

    json summary;
    std::complex<double> endpoint_g, endpoint_e;
    for (char state : {'g', 'e'}) {
        const auto traj = evolve(model, state, t_final, dt, stride);
        const std::string name = std::string("lindblad_") + state + ".csv";
        write_lindblad_csv((out_dir / name).string(), traj);
        const std::string key(1, state);
        summary["deviation_" + key] = deviation(traj, state == 'e');
        summary["max_trace_error_" + key] = traj.max_trace_error;
        summary["min_eigenvalue_" + key] = traj.min_eigenvalue;
        (state == 'g' ? endpoint_g : endpoint_e) = traj.f_mean.back();
    }

    if (flag_or(block, "convergence_check", true)) {
        LindbladDims bigger = dims;
        bigger.n_resonator += 2;
        bigger.n_filter += 2;
        const auto model2 = build_effective_hamiltonian(d, p, drive, bigger, t1);
        // The enlarged generator may need a finer step than the request.
        const double dt_big = std::min(dt, 0.5 * max_stable_dt(model2));
        summary["convergence_dt_s"] = dt_big;
        for (char state : {'g', 'e'}) {
            const auto t_big = evolve(model2, state, t_final, dt_big, stride);
            const auto small = state == 'g' ? endpoint_g : endpoint_e;
            const double ref = std::abs(t_big.f_mean.back());
            const double diff = std::abs(t_big.f_mean.back() - small);
            summary["fock_convergence_" + std::string(1, state)] =
                ref > 0.0 ? diff / ref : diff;
        }
    }

    std::ofstream f(out_dir / "lindblad_summary.json", std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write lindblad_summary.json");
    f << summary.dump(2) << "\n";
    return 0;
}

// Leftover args of the form --a.b.c VALUE override nested config keys.
void apply_dot_overrides(json& cfg, const std::vector<std::string>& extras) {
    for (std::size_t i = 0; i < extras.size(); i += 2) {
        const std::string& flag = extras[i];
        if (flag.rfind("--", 0) != 0)
            throw UsageError("unexpected argument: " + flag);
        if (i + 1 >= extras.size())
            throw UsageError("missing value for " + flag);
        const std::string path = flag.substr(2);
        const std::string& value = extras[i + 1];

        json* node = &cfg;
        std::size_t pos = 0;
        while (true) {
            const std::size_t dot = path.find('.', pos);
            const std::string key = path.substr(pos, dot - pos);
            if (key.empty())
                throw UsageError("bad override path: " + flag);
            if (dot == std::string::npos) {
                json parsed = json::parse(value, nullptr, false);
                (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
                break;
            }
            node = &(*node)[key];
            pos = dot + 1;
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dispersive readout model: sweeps, simulations, and fits"};
    app.set_version_flag("--version", "readout_cli 1.0.0");
    app.require_subcommand(1);
    app.allow_extras();

    std::string config_path, device, out;
    std::int64_t seed = -1;
    int threads = -1;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--device", device, "device parameter JSON (overrides config)");
    app.add_option("--out", out, "output directory (overrides config)");
    app.add_option("--seed", seed, "random seed (overrides config)");
    app.add_option("--threads", threads, "worker pool size, 0 = all cores");

    auto* sub_modes = app.add_subcommand("modes", "normal-mode sweep over detuning");
    auto* sub_snr = app.add_subcommand("snr", "SNR and error-bound sweep");
    auto* sub_shots = app.add_subcommand("shots", "sample and fit single shots");
    auto* sub_fit = app.add_subcommand("fit", "fit a g/e transmission spectrum pair");
    auto* sub_lindblad = app.add_subcommand("lindblad", "master-equation trajectories");
    for (auto* sub : {sub_modes, sub_snr, sub_shots, sub_fit, sub_lindblad})
        sub->allow_extras();

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = json::object();
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f)
                throw UsageError("cannot open config: " + config_path);
            try {
                cfg = json::parse(f);
            } catch (const json::exception& e) {
                throw UsageError("bad config JSON: " + std::string(e.what()));
            }
        }
        CLI::App* sub = app.get_subcommands().front();
        apply_dot_overrides(cfg, sub->remaining());
        apply_dot_overrides(cfg, app.remaining());
        if (!device.empty())
            cfg["device"] = device;
        if (!out.empty())
            cfg["out"] = out;
        if (seed >= 0)
            cfg["seed"] = std::uint64_t(seed);
        if (threads >= 0)
            cfg["threads"] = threads;

        const fs::path out_dir =
            require_key(cfg, "out").get<std::string>();
        write_config_echo(out_dir, cfg);

        if (sub == sub_modes)
            return cmd_modes(cfg, out_dir);
        if (sub == sub_snr)
            return cmd_snr(cfg, out_dir);
        if (sub == sub_shots)
            return cmd_shots(cfg, out_dir);
        if (sub == sub_fit)
            return cmd_fit(cfg, out_dir);
        return cmd_lindblad(cfg, out_dir);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
