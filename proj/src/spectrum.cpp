#include "readout/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "readout/errors.hpp"
#include "readout/lm.hpp"

namespace readout {

namespace {

using cd = std::complex<double>;

struct Dip {
    double omega = 0.0;
    double magnitude = 0.0;
    double width = 0.0;
};

double median_magnitude(const SpectrumTrace& t) {
    auto m = t.magnitudes;
    std::nth_element(m.begin(), m.begin() + m.size() / 2, m.end());
    return m[m.size() / 2];
}

// Two deepest separated local minima, sub-bin refined, with half-depth widths.
std::vector<Dip> find_dips(const SpectrumTrace& t) {
    const auto& f = t.freqs;
    const auto& m = t.magnitudes;
    const double background = median_magnitude(t);
    std::vector<std::size_t> minima;
    for (std::size_t i = 1; i + 1 < m.size(); ++i)
        if (m[i] <= m[i - 1] && m[i] <= m[i + 1])
            minima.push_back(i);
    std::sort(minima.begin(), minima.end(),
              [&](std::size_t a, std::size_t b) { return m[a] < m[b]; });

    std::vector<Dip> dips;
    std::vector<std::size_t> kept;
    // Noise splinters a dip bottom into clustered minima; treat candidates
    // within 2% of the grid as the same dip.
    const std::size_t dedupe = std::max<std::size_t>(5, m.size() / 50);
    for (std::size_t idx : minima) {
        bool close = false;
        for (std::size_t other : kept)
            close |= (idx > other ? idx - other : other - idx) < dedupe;
        if (close)
            continue;
        kept.push_back(idx);
        Dip d;
        // Parabolic vertex through the three bracketing samples.
        const double denom = m[idx - 1] - 2.0 * m[idx] + m[idx + 1];
        double shift = 0.0;
        if (denom > 0.0)
            shift = 0.5 * (m[idx - 1] - m[idx + 1]) / denom;
        d.omega = f[idx] + shift * (f[idx + 1] - f[idx]);
        d.magnitude = m[idx];
        const double level = 0.5 * (background + m[idx]);
        std::size_t lo = idx;
        while (lo > 0 && m[lo] < level)
            --lo;
        std::size_t hi = idx;
        while (hi + 1 < m.size() && m[hi] < level)
            ++hi;
        d.width = f[hi] - f[lo];
        dips.push_back(d);
        if (dips.size() == 2)
            break;
    }
    std::sort(dips.begin(), dips.end(),
              [](const Dip& a, const Dip& b) { return a.omega < b.omega; });
    return dips;
}

// Free-parameter packing. omega_0 stays fixed during the fit: the background
// A + k(omega - omega_0) has only two independent directions, so a floating
// pivot would make the normal matrix exactly singular.
SpectrumModel unpack(const Eigen::VectorXd& p, double omega_0) {
    SpectrumModel m;
    m.A = p[0];
    m.k = p[1];
    m.omega_0 = omega_0;
    m.phi = p[2];
    m.kappa_p = p[3];
    m.J = p[4];
    m.omega_p = p[5];
    m.omega_r_g = p[6];
    m.omega_r_e = p[7];
    return m;
}

} // namespace

cd filter_reflection(const SpectrumModel& model, double omega, bool excited) {
    const double dr = omega - (excited ? model.omega_r_e : model.omega_r_g);
    const double dp = omega - model.omega_p;
    const cd num = model.kappa_p * cd(0.0, -2.0 * dr);
    const cd den = 4.0 * model.J * model.J
        + cd(model.kappa_p, -2.0 * dp) * cd(0.0, -2.0 * dr);
    return num / den;
}

double spectrum_magnitude(const SpectrumModel& model, double omega, bool excited) {
    const cd resp = std::cos(model.phi)
        - std::exp(cd(0.0, model.phi)) * filter_reflection(model, omega, excited);
    return (model.A + model.k * (omega - model.omega_0)) * std::abs(resp);
}

SpectrumTrace synth_spectrum(const SpectrumModel& model,
                             const std::vector<double>& freqs, char state_label) {
    if (freqs.empty())
        throw std::invalid_argument("synth_spectrum: empty frequency grid");
    SpectrumTrace t;
    t.state_label = state_label;
    t.freqs = freqs;
    t.magnitudes.reserve(freqs.size());
    const bool excited = state_label == 'e';
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        if (i > 0 && freqs[i] <= freqs[i - 1])
            throw std::invalid_argument("synth_spectrum: grid not increasing");
        t.magnitudes.push_back(spectrum_magnitude(model, freqs[i], excited));
    }
    return t;
}

std::vector<double> default_fit_grid(const SpectrumModel& model) {
    constexpr int kPoints = 2001;
    const double lo = model.omega_p - 5.0 * model.kappa_p;
    const double hi = model.omega_p + 5.0 * model.kappa_p;
    std::vector<double> freqs(kPoints);
    for (int i = 0; i < kPoints; ++i)
        freqs[i] = lo + (hi - lo) * i / (kPoints - 1);
    return freqs;
}

SpectrumModel initial_model_from_traces(const SpectrumTrace& trace_g,
                                        const SpectrumTrace& trace_e) {
    auto dips_g = find_dips(trace_g);
    auto dips_e = find_dips(trace_e);
    if (dips_g.size() < 2 || dips_e.size() < 2)
        throw ConvergenceError("initial_model_from_traces: fewer than two dips");

    SpectrumModel m;
    m.A = median_magnitude(trace_g);
    m.k = 0.0;
    m.omega_0 = 0.5 * (trace_g.freqs.front() + trace_g.freqs.back());
    m.phi = 0.0;
    m.J = 0.25 * ((dips_g[1].omega - dips_g[0].omega)
                  + (dips_e[1].omega - dips_e[0].omega));
    m.kappa_p = dips_g[0].width + dips_g[1].width;
    const double sum_g = dips_g[0].omega + dips_g[1].omega;
    const double sum_e = dips_e[0].omega + dips_e[1].omega;
    m.omega_p = 0.25 * (sum_g + sum_e);
    m.omega_r_g = sum_g - m.omega_p;
    m.omega_r_e = sum_e - m.omega_p;
    return m;
}

SpectrumFit fit_spectrum(const SpectrumTrace& trace_g, const SpectrumTrace& trace_e,
                         const SpectrumModel& initial, const LmOptions& opts) {
    if (trace_g.freqs.size() != trace_g.magnitudes.size()
        || trace_e.freqs.size() != trace_e.magnitudes.size())
        throw std::invalid_argument("fit_spectrum: ragged trace");

    const auto n_g = trace_g.freqs.size();
    const auto n_e = trace_e.freqs.size();
    const double omega_0 = initial.omega_0;
    ResidualFn residuals = [&](const Eigen::VectorXd& p) {
        const SpectrumModel m = unpack(p, omega_0);
        Eigen::VectorXd r(n_g + n_e);
        for (std::size_t i = 0; i < n_g; ++i)
            r[i] = spectrum_magnitude(m, trace_g.freqs[i], false)
                - trace_g.magnitudes[i];
        for (std::size_t i = 0; i < n_e; ++i)
            r[n_g + i] = spectrum_magnitude(m, trace_e.freqs[i], true)
                - trace_e.magnitudes[i];
        return r;
    };

    Eigen::VectorXd p0(8);
    p0 << initial.A, initial.k, initial.phi, initial.kappa_p, initial.J,
        initial.omega_p, initial.omega_r_g, initial.omega_r_e;

    const double span = trace_g.freqs.back() - trace_g.freqs.front();
    const double amp = std::max(std::abs(initial.A), 0.1);
    Eigen::VectorXd scales(8);
    scales << amp, amp / span, 1.0, span / 10.0, span / 10.0, span, span, span;

    auto result = levenberg_marquardt(residuals, p0, scales, opts);
    if (!result.converged)
        throw ConvergenceError("fit_spectrum: iteration cap reached");

    SpectrumFit fit;
    fit.model = unpack(result.params, omega_0);
    // phi enters only through cos(phi) and a global sign of the inner
    // expression, so it is identifiable modulo pi. Report it in [-pi/2, pi/2].
    fit.model.phi = std::remainder(fit.model.phi, std::acos(-1.0));
    fit.covariance = Eigen::MatrixXd::Zero(9, 9);
    static constexpr int kSlot[8] = {0, 1, 3, 4, 5, 6, 7, 8};
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            fit.covariance(kSlot[i], kSlot[j]) = result.covariance(i, j);
    fit.residual_norm = std::sqrt(result.cost);
    fit.iterations = result.iterations;
    fit.condition_number = result.condition_number;
    fit.identifiable = result.condition_number <= 1e10;
    return fit;
}

} // namespace readout
