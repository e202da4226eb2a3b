#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "readout/io.hpp"
#include "readout/model.hpp"
#include "readout/normal_modes.hpp"
#include "readout/spectrum.hpp"
#include "readout/units.hpp"

using namespace readout;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kDevice =
    std::string(READOUT_DATA_DIR) + "/device_dqr_m1p3.json";

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(READOUT_CLI_BIN) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[512];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe))
        r.output.append(buf, n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path case_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "readout_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    f << j.dump(2);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(bool(f));
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<double>> parse_csv(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(bool(f));
    std::vector<std::vector<double>> rows;
    std::string line;
    std::getline(f, line); // header
    while (std::getline(f, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ','))
            row.push_back(std::stod(field));
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST_CASE("version and help are served") {
    auto v = run_cli("--version");
    CHECK(v.exit_code == 0);
    CHECK(v.output.find("readout_cli") != std::string::npos);

    auto h = run_cli("--help");
    CHECK(h.exit_code == 0);
    CHECK(h.output.find("lindblad") != std::string::npos);
}

TEST_CASE("modes sweep matches the in-process computation") {
    auto dir = case_dir("modes");
    json cfg;
    cfg["device"] = kDevice;
    cfg["out"] = (dir / "out").string();
    cfg["modes"]["detunings_Hz"] = {-2.7e9, -1.9e9, -1.3e9};
    write_json(dir / "cfg.json", cfg);

    auto r = run_cli("--config " + (dir / "cfg.json").string() + " modes");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(dir / "out" / "config-echo.json"));

    auto rows = parse_csv(dir / "out" / "modes.csv");
    REQUIRE(rows.size() == 3);
    auto base = load_device_params(kDevice);
    for (const auto& row : rows) {
        REQUIRE(row.size() == 11);
        DeviceParams p = base;
        p.omega_q = p.omega_r_bare + hz_to_rad(row[0]);
        auto nm = exact_modes(derive_dispersive(p), p);
        CHECK(row[1] == doctest::Approx(rad_to_hz(nm.omega_l_g)).epsilon(1e-12));
        CHECK(row[4] == doctest::Approx(rad_to_hz(nm.omega_h_e)).epsilon(1e-12));
        CHECK(row[5] == doctest::Approx(rad_to_hz(nm.kappa_l_g)).epsilon(1e-12));
        CHECK(row[9] == doctest::Approx(rad_to_hz(nm.chi_l)).epsilon(1e-12));
        CHECK(row[10] == doctest::Approx(rad_to_hz(nm.chi_h)).epsilon(1e-12));
    }

    // Single-point grid degenerates to a single row.
    auto single = run_cli("--config " + (dir / "cfg.json").string() +
                          " --out " + (dir / "single").string() +
                          " modes --modes.detunings_Hz [-1.3e9]");
    REQUIRE(single.exit_code == 0);
    CHECK(parse_csv(dir / "single" / "modes.csv").size() == 1);
}

TEST_CASE("empty or missing grids are usage errors") {
    auto dir = case_dir("usage");
    json cfg;
    cfg["device"] = kDevice;
    cfg["out"] = (dir / "out").string();
    write_json(dir / "cfg.json", cfg);

    auto r = run_cli("--config " + (dir / "cfg.json").string() +
                     " modes --modes.detunings_Hz '[]'");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("non-empty") != std::string::npos);

    auto missing = run_cli("--config " + (dir / "cfg.json").string() + " modes");
    CHECK(missing.exit_code == 2);

    auto zero_shots = run_cli(
        "--config " + (dir / "cfg.json").string() +
        " shots --shots.omega_d_Hz 6881.6e6 --shots.amplitude_Hz 55e6"
        " --shots.tau_s 1e-7 --shots.n_shots 0");
    CHECK(zero_shots.exit_code == 2);
    CHECK(zero_shots.output.find("n_shots") != std::string::npos);
}

TEST_CASE("shot outputs are byte stable for a fixed seed") {
    auto dir = case_dir("shots");
    json cfg;
    cfg["device"] = kDevice;
    cfg["seed"] = 11;
    cfg["shots"] = {{"omega_d_Hz", 6881.6e6}, {"amplitude_Hz", 55e6},
                    {"tau_s", 1e-7},          {"n_shots", 300},
                    {"t1_enabled", false}};
    cfg["out"] = (dir / "a").string();
    write_json(dir / "cfg.json", cfg);

    auto a = run_cli("--config " + (dir / "cfg.json").string() + " shots");
    REQUIRE(a.exit_code == 0);
    auto b = run_cli("--config " + (dir / "cfg.json").string() + " --out " +
                     (dir / "b").string() + " shots");
    REQUIRE(b.exit_code == 0);
    CHECK(slurp(dir / "a" / "shots.csv") == slurp(dir / "b" / "shots.csv"));
    CHECK(slurp(dir / "a" / "metrics.json") == slurp(dir / "b" / "metrics.json"));

    auto c = run_cli("--config " + (dir / "cfg.json").string() + " --out " +
                     (dir / "c").string() + " --seed 12 shots");
    REQUIRE(c.exit_code == 0);
    CHECK(slurp(dir / "a" / "shots.csv") != slurp(dir / "c" / "shots.csv"));

    auto metrics = json::parse(slurp(dir / "a" / "metrics.json"));
    CHECK(metrics["snr"].get<double>() > 10.0);
    CHECK(metrics["bound"].contains("overlap_error"));
}

TEST_CASE("snr sweep output is independent of the worker count") {
    auto dir = case_dir("snr");
    json cfg;
    cfg["device"] = kDevice;
    cfg["out"] = (dir / "t1").string();
    cfg["threads"] = 1;
    cfg["snr"] = {{"detunings_Hz", {-2.7e9, -1.3e9}},
                  {"taus_s", {1e-7, 4e-7}},
                  {"n_over_ncrit", {0.0, 0.1}}};
    write_json(dir / "cfg.json", cfg);

    auto one = run_cli("--config " + (dir / "cfg.json").string() + " snr");
    REQUIRE(one.exit_code == 0);
    auto four = run_cli("--config " + (dir / "cfg.json").string() + " --out " +
                        (dir / "t4").string() + " --threads 4 snr");
    REQUIRE(four.exit_code == 0);
    CHECK(slurp(dir / "t1" / "snr_sweep.csv") == slurp(dir / "t4" / "snr_sweep.csv"));

    auto rows = parse_csv(dir / "t1" / "snr_sweep.csv");
    REQUIRE(rows.size() == 8);
    // Grid order: detuning-major, then tau, then power.
    CHECK(rows[0][0] == doctest::Approx(-2.7e9));
    CHECK(rows[3][0] == doctest::Approx(-2.7e9));
    CHECK(rows[4][0] == doctest::Approx(-1.3e9));
    CHECK(rows[0][1] == doctest::Approx(1e-7));
    CHECK(rows[2][1] == doctest::Approx(4e-7));
    for (std::size_t i = 0; i < rows.size(); i += 2) {
        CHECK(rows[i][3] == 0.0);      // zero power rows carry zero snr
        CHECK(rows[i + 1][3] > 0.0);
    }
}

TEST_CASE("fit command recovers synthetic traces") {
    auto dir = case_dir("fit");

    SpectrumModel truth;
    truth.A = 1.0;
    truth.phi = 0.3;
    truth.kappa_p = hz_to_rad(34.5e6);
    truth.J = hz_to_rad(27.9e6);
    truth.omega_p = hz_to_rad(6899.86e6);
    truth.omega_r_g = hz_to_rad(6928.43e6);
    truth.omega_r_e = hz_to_rad(6908.94e6);
    truth.omega_0 = truth.omega_p;
    auto grid = default_fit_grid(truth);
    write_trace_csv((dir / "g.csv").string(), synth_spectrum(truth, grid, 'g'));
    write_trace_csv((dir / "e.csv").string(), synth_spectrum(truth, grid, 'e'));

    json cfg;
    cfg["device"] = kDevice;
    cfg["out"] = (dir / "out").string();
    cfg["fit"] = {{"trace_g", (dir / "g.csv").string()},
                  {"trace_e", (dir / "e.csv").string()}};
    write_json(dir / "cfg.json", cfg);

    auto r = run_cli("--config " + (dir / "cfg.json").string() + " fit");
    REQUIRE(r.exit_code == 0);

    auto report = json::parse(slurp(dir / "out" / "fit_report.json"));
    CHECK(report["params"]["J_Hz"].get<double>() == doctest::Approx(27.9e6).epsilon(1e-6));
    CHECK(report["params"]["kappa_p_Hz"].get<double>()
          == doctest::Approx(34.5e6).epsilon(1e-6));
    CHECK(report["params"]["omega_r_e_Hz"].get<double>()
          == doctest::Approx(6908.94e6).epsilon(1e-9));
    CHECK(report["residual_norm"].get<double>() < 1e-8);

    auto modes = json::parse(slurp(dir / "out" / "fit_modes.json"));
    CHECK(modes["chi_l_Hz"].get<double>() < 0.0);
    CHECK(modes["chi_h_Hz"].get<double>() < 0.0);
    CHECK(modes["kappa_l_g_Hz"].get<double>() > 0.0);

    // A broken trace file surfaces the line number and fails the run.
    std::ofstream bad(dir / "bad.csv");
    bad << "freq_Hz,magnitude\n6.88e9,0.5\n6.89e9,oops\n";
    bad.close();
    auto rb = run_cli("--config " + (dir / "cfg.json").string() + " --out " +
                      (dir / "out2").string() + " fit --fit.trace_g " +
                      (dir / "bad.csv").string());
    CHECK(rb.exit_code == 1);
    CHECK(rb.output.find(":3:") != std::string::npos);
}

TEST_CASE("lindblad command reports the semiclassical deviation") {
    auto dir = case_dir("lindblad");
    json cfg;
    cfg["device"] = kDevice;
    cfg["out"] = (dir / "out").string();
    cfg["lindblad"] = {{"omega_d_Hz", 6881.6e6}, {"amplitude_Hz", 10e6},
                       {"envelope", "constant"}, {"n_resonator", 6},
                       {"n_filter", 6},          {"t_final_s", 6e-8},
                       {"dt_s", 1e-10},          {"convergence_check", true}};
    write_json(dir / "cfg.json", cfg);

    auto r = run_cli("--config " + (dir / "cfg.json").string() + " lindblad");
    REQUIRE(r.exit_code == 0);

    auto summary = json::parse(slurp(dir / "out" / "lindblad_summary.json"));
    CHECK(summary["deviation_g"].get<double>() < 0.05);
    CHECK(summary["deviation_e"].get<double>() < 0.05);
    CHECK(summary["max_trace_error_g"].get<double>() < 1e-8);
    CHECK(summary["fock_convergence_g"].get<double>() < 1e-2);
    CHECK(parse_csv(dir / "out" / "lindblad_g.csv").size() > 10);

    // Zero drive leaves the fields at zero.
    auto rz = run_cli("--config " + (dir / "cfg.json").string() + " --out " +
                      (dir / "zero").string() +
                      " lindblad --lindblad.amplitude_Hz 0"
                      " --lindblad.convergence_check false");
    REQUIRE(rz.exit_code == 0);
    for (const auto& row : parse_csv(dir / "zero" / "lindblad_e.csv")) {
        CHECK(row[1] == 0.0);
        CHECK(row[3] == 0.0);
    }
}
