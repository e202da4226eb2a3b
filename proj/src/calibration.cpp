#include "readout/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "readout/errors.hpp"
#include "readout/lm.hpp"

namespace readout {

double photons_from_stark(double shift, double chi_l, double chi_h) {
    const double per_photon = 2.0 * (chi_l + chi_h);
    if (per_photon == 0.0)
        throw PoleError("photons_from_stark: chi_l + chi_h vanishes");
    return shift / per_photon;
}

double drive_amplitude_from_photons(double n_g, const DispersiveDerived& derived,
                                    const DeviceParams& params, double omega_d) {
    if (n_g < 0.0)
        throw std::invalid_argument("drive_amplitude_from_photons: negative photon number");
    if (n_g == 0.0)
        return 0.0;
    DriveSpec unit;
    unit.omega_d = omega_d;
    unit.amplitude = 1.0;
    const double a1 = std::abs(steady_state(derived, params, unit).g.alpha);
    if (a1 == 0.0)
        throw PoleError("drive_amplitude_from_photons: unit-drive response vanishes");
    return std::sqrt(n_g) / a1;
}

StarkShiftConventions stark_shift_conventions(double chi_l, double chi_h,
                                              const DispersiveDerived& derived,
                                              const DeviceParams& params) {
    StarkShiftConventions c;
    c.mode_resolved = 2.0 * (chi_l + chi_h);
    c.two_level = 2.0 * params.g_charge * params.g_charge / derived.delta_qr;
    c.ratio = c.mode_resolved / c.two_level;
    return c;
}

GaussianPeak fit_gaussian_peak(const std::vector<double>& x,
                               const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("fit_gaussian_peak: size mismatch");
    if (x.size() < 5)
        throw std::invalid_argument("fit_gaussian_peak: need at least 5 points");

    const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
    const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
    const double span = *xmax_it - *xmin_it;
    if (span <= 0.0)
        throw std::invalid_argument("fit_gaussian_peak: degenerate x grid");

    // Start as a peak or a dip, whichever extreme sticks out further from the
    // bulk; the wrong choice strands the fit in a shoulder minimum.
    double med = 0.0;
    {
        std::vector<double> tmp(y);
        auto mid = tmp.begin() + tmp.size() / 2;
        std::nth_element(tmp.begin(), mid, tmp.end());
        med = *mid;
    }
    const bool up = *ymax_it - med >= med - *ymin_it;
    Eigen::VectorXd p0(4);
    if (up)
        p0 << *ymin_it, *ymax_it - *ymin_it, x[std::size_t(ymax_it - y.begin())],
            span / 6.0;
    else
        p0 << *ymax_it, *ymin_it - *ymax_it, x[std::size_t(ymin_it - y.begin())],
            span / 6.0;

    const double yscale = std::max(std::abs(*ymin_it), std::abs(*ymax_it));
    Eigen::VectorXd scales(4);
    scales << std::max(yscale, 1.0), std::max(yscale, 1.0), span, span;

    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = (x[i] - p[2]) / p[3];
            r[i] = p[0] + p[1] * std::exp(-0.5 * u * u) - y[i];
        }
        return r;
    };

    auto res = levenberg_marquardt(residuals, p0, scales);
    if (!res.converged)
        throw ConvergenceError("fit_gaussian_peak: fit stalled");

    GaussianPeak peak;
    peak.offset = res.params[0];
    peak.amplitude = res.params[1];
    peak.center = res.params[2];
    peak.width = std::abs(res.params[3]); // model depends on width^2 only
    peak.rms_residual = std::sqrt(res.cost / double(x.size()));
    return peak;
}

} // namespace readout
