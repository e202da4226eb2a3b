#include "readout/shots.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "readout/errors.hpp"
#include "readout/snr.hpp"

namespace readout {

namespace {

using cd = std::complex<double>;

struct WindowSamples {
    std::vector<double> t;
    std::vector<cd> beta_g, beta_e;
};

// Trajectory restricted to [0, tau], with an interpolated end node at tau.
WindowSamples window_samples(const FieldTrajectory& traj, double tau) {
    if (tau <= 0.0)
        throw SpanError("matched_weights: tau must be positive");
    if (traj.times.empty() || traj.times.back() < tau * (1.0 - 1e-12))
        throw SpanError("matched_weights: trajectory shorter than tau");

    WindowSamples w;
    std::size_t i = 0;
    for (; i < traj.times.size() && traj.times[i] <= tau * (1.0 + 1e-12); ++i) {
        w.t.push_back(traj.times[i]);
        w.beta_g.push_back(traj.beta_g[i]);
        w.beta_e.push_back(traj.beta_e[i]);
    }
    if (w.t.empty())
        throw SpanError("matched_weights: no samples inside the window");
    if (w.t.back() < tau * (1.0 - 1e-12)) {
        const double t0 = traj.times[i - 1], t1 = traj.times[i];
        const double s = (tau - t0) / (t1 - t0);
        w.t.push_back(tau);
        w.beta_g.push_back(traj.beta_g[i - 1] +
                           s * (traj.beta_g[i] - traj.beta_g[i - 1]));
        w.beta_e.push_back(traj.beta_e[i - 1] +
                           s * (traj.beta_e[i] - traj.beta_e[i - 1]));
    }
    return w;
}

double trapezoid_sq(const std::vector<double>& t, const std::vector<cd>& f) {
    double s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k)
        s += 0.5 * (t[k] - t[k - 1]) * (std::norm(f[k]) + std::norm(f[k - 1]));
    return s;
}

cd trapezoid_prod(const std::vector<double>& t, const std::vector<cd>& w,
                  const std::vector<cd>& f) {
    cd s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k)
        s += 0.5 * (t[k] - t[k - 1]) *
             (std::conj(w[k]) * f[k] + std::conj(w[k - 1]) * f[k - 1]);
    return s;
}

} // namespace

MatchedWeights matched_weights(const FieldTrajectory& trajectory, double tau) {
    auto win = window_samples(trajectory, tau);
    std::vector<cd> diff(win.t.size());
    for (std::size_t k = 0; k < diff.size(); ++k)
        diff[k] = win.beta_e[k] - win.beta_g[k];
    const double norm2 = trapezoid_sq(win.t, diff);
    if (norm2 <= 0.0)
        throw ZeroSeparationError("matched_weights: beta_e identical to beta_g");
    MatchedWeights out;
    out.times = std::move(win.t);
    out.w.resize(diff.size());
    const double scale = 1.0 / std::sqrt(norm2);
    for (std::size_t k = 0; k < diff.size(); ++k)
        out.w[k] = diff[k] * scale;
    return out;
}

ShotSet sample_shots(const FieldTrajectory& trajectory, const DeviceParams& params,
                     double tau, std::size_t n_shots_per_state, std::uint64_t seed,
                     const ShotOptions& opts) {
    if (n_shots_per_state < 1)
        throw std::invalid_argument("sample_shots: need at least one shot per state");

    auto win = window_samples(trajectory, tau);
    auto weights = matched_weights(trajectory, tau);
    const cd mu_g = trapezoid_prod(win.t, weights.w, win.beta_g);
    const cd mu_e = trapezoid_prod(win.t, weights.w, win.beta_e);
    const double snr = snr_integral(trajectory, params, tau);
    const double sigma = std::abs(mu_e - mu_g) / std::sqrt(snr);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> decay(1.0 / params.T1);

    ShotSet set;
    set.n_shots_per_state = n_shots_per_state;
    set.tau = tau;
    set.seed = seed;
    set.records.reserve(2 * n_shots_per_state);

    const double sigma_g = sigma * opts.sigma_g_scale;
    for (std::size_t k = 0; k < n_shots_per_state; ++k) {
        const cd s = mu_g + sigma_g * cd(normal(rng), normal(rng));
        set.records.push_back({s.real(), s.imag(), 'g'});
    }
    for (std::size_t k = 0; k < n_shots_per_state; ++k) {
        cd base = mu_e;
        if (opts.t1_enabled) {
            const double t_d = decay(rng);
            if (t_d < tau)
                base = opts.decay_model == DecayModel::GroundSignal
                           ? mu_g
                           : (t_d / tau) * mu_e + (1.0 - t_d / tau) * mu_g;
        }
        const cd s = base + sigma * cd(normal(rng), normal(rng));
        set.records.push_back({s.real(), s.imag(), 'e'});
    }
    return set;
}

namespace {

struct Component {
    double weight = 0.5;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

double log_gauss2(const Eigen::Vector2d& x, const Component& c) {
    const double det = c.cov.determinant();
    const Eigen::Vector2d d = x - c.mean;
    const double q = d.dot(c.cov.inverse() * d);
    return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * q;
}

} // namespace

MixtureFit fit_mixture(const ShotSet& shots) {
    std::size_t n_g = 0, n_e = 0;
    for (const auto& r : shots.records)
        (r.prepared == 'g' ? n_g : n_e) += 1;
    if (n_g < 100 || n_e < 100)
        throw std::invalid_argument("fit_mixture: need at least 100 shots per label");

    const std::size_t n = shots.records.size();
    Eigen::MatrixX2d x(n, 2);
    for (std::size_t k = 0; k < n; ++k)
        x.row(k) << shots.records[k].i, shots.records[k].q;

    // Label-free initialization: median split along the principal axis.
    const Eigen::RowVector2d mean0 = x.colwise().mean();
    const Eigen::MatrixX2d centered = x.rowwise() - mean0;
    const Eigen::Matrix2d total_cov =
        centered.transpose() * centered / double(n);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(total_cov);
    const Eigen::Vector2d axis = es.eigenvectors().col(1);
    Eigen::VectorXd proj = centered * axis;
    Eigen::VectorXd sorted = proj;
    std::nth_element(sorted.data(), sorted.data() + n / 2, sorted.data() + n);
    const double median = sorted[n / 2];

    const double ridge = 1e-12 * std::max(total_cov.trace(), 1e-30);
    Component comp[2];
    {
        Eigen::Vector2d sum[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
        std::size_t cnt[2] = {0, 0};
        for (std::size_t k = 0; k < n; ++k) {
            const int side = proj[k] > median ? 1 : 0;
            sum[side] += x.row(k).transpose();
            cnt[side] += 1;
        }
        for (int c = 0; c < 2; ++c) {
            if (cnt[c] == 0) { // fully degenerate projections
                comp[c].mean = mean0.transpose();
                cnt[c] = 1;
            } else {
                comp[c].mean = sum[c] / double(cnt[c]);
            }
            comp[c].weight = 0.5;
        }
        Eigen::Matrix2d scat[2] = {Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
        for (std::size_t k = 0; k < n; ++k) {
            const int side = proj[k] > median ? 1 : 0;
            const Eigen::Vector2d d = x.row(k).transpose() - comp[side].mean;
            scat[side] += d * d.transpose();
        }
        for (int c = 0; c < 2; ++c)
            comp[c].cov = scat[c] / double(std::max<std::size_t>(cnt[c], 1)) +
                          ridge * Eigen::Matrix2d::Identity();
    }

    Eigen::MatrixX2d resp(n, 2);
    double loglik = 0.0, loglik_prev = 0.0;
    int iter = 0;
    for (; iter < 500; ++iter) {
        loglik = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const Eigen::Vector2d xi = x.row(k).transpose();
            double l0 = std::log(comp[0].weight) + log_gauss2(xi, comp[0]);
            double l1 = std::log(comp[1].weight) + log_gauss2(xi, comp[1]);
            const double m = std::max(l0, l1);
            const double z = std::exp(l0 - m) + std::exp(l1 - m);
            loglik += m + std::log(z);
            resp(k, 0) = std::exp(l0 - m) / z;
            resp(k, 1) = std::exp(l1 - m) / z;
        }
        for (int c = 0; c < 2; ++c) {
            const double nc = resp.col(c).sum();
            comp[c].weight = nc / double(n);
            if (comp[c].weight < 1e-3)
                throw DegenerateComponentError(
                    "fit_mixture: component weight below 1e-3");
            const Eigen::Vector2d mu =
                (resp.col(c).asDiagonal() * x).colwise().sum().transpose() / nc;
            Eigen::Matrix2d scat = Eigen::Matrix2d::Zero();
            for (std::size_t k = 0; k < n; ++k) {
                const Eigen::Vector2d d = x.row(k).transpose() - mu;
                scat += resp(k, c) * d * d.transpose();
            }
            comp[c].mean = mu;
            comp[c].cov = scat / nc + ridge * Eigen::Matrix2d::Identity();
        }
        if (iter > 0 && std::abs(loglik - loglik_prev) < 1e-9 * double(n))
            break;
        loglik_prev = loglik;
    }

    // Preparation labels pick which component is called g.
    Eigen::Vector2d label_mean_g = Eigen::Vector2d::Zero();
    for (const auto& r : shots.records)
        if (r.prepared == 'g')
            label_mean_g += Eigen::Vector2d(r.i, r.q);
    label_mean_g /= double(n_g);
    const int ig = (comp[0].mean - label_mean_g).norm() <=
                           (comp[1].mean - label_mean_g).norm()
                       ? 0
                       : 1;
    const Component& cg = comp[ig];
    const Component& ce = comp[1 - ig];

    MixtureFit fit;
    fit.mu_g = cd(cg.mean[0], cg.mean[1]);
    fit.mu_e = cd(ce.mean[0], ce.mean[1]);
    fit.cov_g = cg.cov;
    fit.cov_e = ce.cov;
    fit.sigma_g = std::sqrt(0.5 * cg.cov.trace());
    fit.sigma_e = std::sqrt(0.5 * ce.cov.trace());
    fit.weight_g = cg.weight;
    fit.weight_e = ce.weight;
    fit.iterations = iter + 1;
    fit.log_likelihood = loglik;

    // Equal-posterior crossing along the inter-mean axis.
    Eigen::Vector2d delta = ce.mean - cg.mean;
    const double sep = delta.norm();
    if (sep > 0.0) {
        const Eigen::Vector2d u = delta / sep;
        const double mg = u.dot(cg.mean), me = u.dot(ce.mean);
        const double vg = u.dot(cg.cov * u), ve = u.dot(ce.cov * u);
        const double c0 = std::log(cg.weight / ce.weight) + 0.5 * std::log(ve / vg);
        const double a = 0.5 / ve - 0.5 / vg;
        const double b = mg / vg - me / ve;
        const double c = 0.5 * (me * me / ve - mg * mg / vg) + c0;
        double s = 0.5 * (mg + me);
        if (std::abs(a) < 1e-12 / std::max(vg, ve)) {
            if (b != 0.0)
                s = -c / b;
        } else {
            const double disc = b * b - 4.0 * a * c;
            if (disc >= 0.0) {
                const double r1 = (-b + std::sqrt(disc)) / (2.0 * a);
                const double r2 = (-b - std::sqrt(disc)) / (2.0 * a);
                const double lo = std::min(mg, me), hi = std::max(mg, me);
                if (r1 >= lo && r1 <= hi)
                    s = r1;
                else if (r2 >= lo && r2 <= hi)
                    s = r2;
            }
        }
        fit.assignment_threshold = s;
    }
    return fit;
}

ShotMetrics extract_metrics(const MixtureFit& fit, const ShotSet& shots) {
    ShotMetrics m;
    const Eigen::Vector2d mu_g(fit.mu_g.real(), fit.mu_g.imag());
    const Eigen::Vector2d mu_e(fit.mu_e.real(), fit.mu_e.imag());
    const Eigen::Vector2d delta = mu_e - mu_g;
    const double sep = delta.norm();
    if (sep > 0.0) {
        const Eigen::Vector2d u = delta / sep;
        const double sg = std::sqrt(u.dot(fit.cov_g * u));
        const double se = std::sqrt(u.dot(fit.cov_e * u));
        const double avg = 0.5 * (sg + se);
        m.snr = avg > 0.0 ? (sep / avg) * (sep / avg) : 0.0;
    }

    Component cg{fit.weight_g, mu_g, fit.cov_g};
    Component ce{fit.weight_e, mu_e, fit.cov_e};
    std::size_t n_g = 0, n_e = 0, mis_g = 0, mis_e = 0;
    for (const auto& r : shots.records) {
        const Eigen::Vector2d xi(r.i, r.q);
        const double lg = std::log(cg.weight) + log_gauss2(xi, cg);
        const double le = std::log(ce.weight) + log_gauss2(xi, ce);
        const char assigned = lg >= le ? 'g' : 'e';
        if (r.prepared == 'g') {
            n_g += 1;
            mis_g += assigned != 'g';
        } else {
            n_e += 1;
            mis_e += assigned != 'e';
        }
    }
    m.p_e_given_g = n_g ? double(mis_g) / double(n_g) : 0.0;
    m.p_g_given_e = n_e ? double(mis_e) / double(n_e) : 0.0;
    m.epsilon_a = 0.5 * (m.p_e_given_g + m.p_g_given_e);
    return m;
}

} // namespace readout
