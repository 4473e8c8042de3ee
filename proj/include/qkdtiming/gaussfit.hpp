#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "histogram.hpp"

namespace qkdtiming {

struct FitOptions {
    double tolerance{1e-9};        // relative parameter change to declare convergence
    int max_iterations{200};
    double residual_window_sigmas{4.0}; // bins within this many sigma of the
                                        // fitted mean enter the noise estimate
};

/// Least-squares Gaussian fit of a peak plus the variance of its fitted mean.
///
/// mean_variance is the linearized propagation of the bin noise into the
/// fitted mean: for equally spaced bins covering the whole peak it equals
/// (2/sqrt(pi)) * D(df)/A^2 * sigma * dx, with D(df) the (unbiased, pooled)
/// variance of the fit residuals.
struct GaussianFit {
    GaussianPeak peak;
    double mean_variance{0.0};     // D(mu_a), ps^2
    double residual_variance{0.0}; // D(df), squared counts
    double epsilon{0.0};           // sqrt(D(mu_a))/sigma; linearization assumes << 1
    bool truncated_peak{false};    // peak not well inside the histogram support
    int iterations{0};
    std::vector<double> residuals; // f_i - model(x_i), window bins only
    std::vector<double> z;         // (x_i - mu_a)/sigma_a, window bins only

    double three_sigma() const { return 3.0 * std::sqrt(mean_variance); }
};

/// Unbiased variance of the fit residuals, pooled over the peak window
/// (variance with unknown mean, 1/(n-1) normalization).
inline double residual_variance_of(std::span<const double> residuals) {
    const std::size_t n = residuals.size();
    if (n < 2)
        throw config_error("residual_variance: need at least 2 bins");
    double mean = 0.0;
    for (double r : residuals) mean += r;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double r : residuals) ss += (r - mean) * (r - mean);
    return ss / static_cast<double>(n - 1);
}

/// Closed-form variance of the fitted mean: (2/sqrt(pi)) * D(df)/A^2 * sigma * dx.
/// Valid for equally spaced bins whose range covers the whole peak.
inline double mean_variance_closed_form(const GaussianPeak& peak,
                                        double residual_variance,
                                        TimePs bin_width) {
    if (!(peak.amplitude > 0.0))
        throw config_error("mean_variance_closed_form: amplitude must be positive");
    if (!(peak.sigma > 0.0))
        throw config_error("mean_variance_closed_form: sigma must be positive");
    if (!(residual_variance >= 0.0))
        throw config_error("mean_variance_closed_form: residual variance must be >= 0");
    return (2.0 / std::sqrt(std::numbers::pi)) *
           (residual_variance / (peak.amplitude * peak.amplitude)) * peak.sigma *
           bin_width;
}

/// Exact-sum variance of the fitted mean over the actual bin centers:
/// sigma^2 * D(df) / (A^2 * sum_i z_i^2 exp(-z_i^2)). Reduces to the closed
/// form when the bins are dense and span the peak.
inline double mean_variance_sum_form(const GaussianPeak& peak,
                                     double residual_variance,
                                     std::span<const TimePs> bin_centers) {
    if (!(peak.amplitude > 0.0))
        throw config_error("mean_variance_sum_form: amplitude must be positive");
    if (!(peak.sigma > 0.0))
        throw config_error("mean_variance_sum_form: sigma must be positive");
    if (bin_centers.empty())
        throw config_error("mean_variance_sum_form: bin centers must be nonempty");
    double s = 0.0;
    bool distinct = false;
    for (TimePs x : bin_centers) {
        if (x != bin_centers.front()) distinct = true;
        const double zi = (x - peak.mean) / peak.sigma;
        s += zi * zi * std::exp(-zi * zi);
    }
    if (!distinct || !(s > 0.0))
        throw config_error("mean_variance_sum_form: degenerate bin support");
    return peak.sigma * peak.sigma * residual_variance /
           (peak.amplitude * peak.amplitude * s);
}

namespace detail {

// Solve the 3x3 system M x = b in place (partial pivoting).
inline bool solve3(double M[3][3], double b[3], double x[3]) {
    int idx[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(M[idx[r]][col]) > std::abs(M[idx[piv]][col])) piv = r;
        std::swap(idx[col], idx[piv]);
        const double d = M[idx[col]][col];
        if (d == 0.0 || !std::isfinite(d)) return false;
        for (int r = col + 1; r < 3; ++r) {
            const double f = M[idx[r]][col] / d;
            for (int c = col; c < 3; ++c) M[idx[r]][c] -= f * M[idx[col]][c];
            b[idx[r]] -= f * b[idx[col]];
        }
    }
    for (int row = 2; row >= 0; --row) {
        double s = b[idx[row]];
        for (int c = row + 1; c < 3; ++c) s -= M[idx[row]][c] * x[c];
        if (M[idx[row]][row] == 0.0) return false;
        x[row] = s / M[idx[row]][row];
    }
    return true;
}

inline double sum_squared_residuals(std::span<const double> x,
                                    std::span<const double> f, double A,
                                    double mu, double sigma) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double zi = (x[i] - mu) / sigma;
        const double r = f[i] - A * std::exp(-0.5 * zi * zi);
        ssr += r * r;
    }
    return ssr;
}

} // namespace detail

/// Damped Gauss-Newton fit of A * exp(-(x-mu)^2 / (2 sigma^2)) to (x, f).
/// Seeds from the argmax bin and the weighted moments, then iterates with
/// Levenberg damping until the relative parameter change drops below the
/// tolerance. Throws fit_error on non-convergence.
inline GaussianFit fit_gaussian_points(std::span<const double> x,
                                       std::span<const double> f,
                                       TimePs bin_width,
                                       const FitOptions& opt = {}) {
    if (x.size() != f.size())
        throw config_error("fit_gaussian: x and f sizes differ");
    std::size_t nonempty = 0;
    for (double v : f) nonempty += (v != 0.0);
    if (nonempty < 10)
        throw fit_error("fit_gaussian: fewer than 10 nonempty bins (" +
                        std::to_string(nonempty) + ")");

    // seed: argmax bin for mu and A, weighted second moment for sigma
    std::size_t imax = 0;
    double total = 0.0, mean_acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] > f[imax]) imax = i;
        total += f[i];
        mean_acc += f[i] * x[i];
    }
    if (!(total > 0.0)) throw fit_error("fit_gaussian: empty histogram");
    const double wmean = mean_acc / total;
    double var_acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        var_acc += f[i] * (x[i] - wmean) * (x[i] - wmean);
    double A = f[imax];
    double mu = x[imax];
    double sigma = std::sqrt(std::max(var_acc / total, 0.0));
    if (!(sigma > bin_width / 2.0)) sigma = bin_width;

    double ssr = detail::sum_squared_residuals(x, f, A, mu, sigma);
    double lambda = 1e-3;
    int iterations = 0;
    bool converged = false;
    while (iterations < opt.max_iterations && !converged) {
        ++iterations;
        // normal equations J^T J delta = J^T r
        double JtJ[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        double Jtr[3] = {0, 0, 0};
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double zi = (x[i] - mu) / sigma;
            const double e = std::exp(-0.5 * zi * zi);
            const double r = f[i] - A * e;
            const double j[3] = {e, A * e * zi / sigma, A * e * zi * zi / sigma};
            for (int a = 0; a < 3; ++a) {
                Jtr[a] += j[a] * r;
                for (int b = a; b < 3; ++b) JtJ[a][b] += j[a] * j[b];
            }
        }
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < a; ++b) JtJ[a][b] = JtJ[b][a];

        bool stepped = false;
        for (int attempt = 0; attempt < 40 && !stepped; ++attempt) {
            double M[3][3];
            double rhs[3] = {Jtr[0], Jtr[1], Jtr[2]};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    M[a][b] = JtJ[a][b] * (a == b ? 1.0 + lambda : 1.0);
            double delta[3];
            if (detail::solve3(M, rhs, delta)) {
                const double A2 = A + delta[0];
                const double mu2 = mu + delta[1];
                double sigma2 = std::abs(sigma + delta[2]);
                if (sigma2 < bin_width * 1e-3) sigma2 = bin_width * 1e-3;
                const double ssr2 =
                    detail::sum_squared_residuals(x, f, A2, mu2, sigma2);
                if (ssr2 <= ssr && std::isfinite(ssr2)) {
                    const double rel = std::max(
                        {std::abs(delta[0]) / (std::abs(A) + 1e-300),
                         std::abs(delta[1]) / (std::abs(mu) + sigma),
                         std::abs(delta[2]) / (std::abs(sigma) + 1e-300)});
                    A = A2;
                    mu = mu2;
                    sigma = sigma2;
                    ssr = ssr2;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    stepped = true;
                    if (rel < opt.tolerance) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // no damped step can lower the residual: stationary point
            converged = true;
        }
    }
    if (!converged)
        throw fit_error("fit_gaussian: no convergence after " +
                        std::to_string(iterations) + " iterations");
    if (!(A > 0.0) || !(sigma > 0.0))
        throw fit_error("fit_gaussian: degenerate fitted peak");

    GaussianFit fit;
    fit.peak = GaussianPeak{A, mu, sigma};
    fit.iterations = iterations;

    // residual noise is pooled over the informative window around the peak
    const double win = opt.residual_window_sigmas * sigma;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i] - mu) > win) continue;
        const double zi = (x[i] - mu) / sigma;
        fit.z.push_back(zi);
        fit.residuals.push_back(f[i] - A * std::exp(-0.5 * zi * zi));
    }
    if (fit.residuals.size() < 2)
        throw fit_error("fit_gaussian: residual window holds fewer than 2 bins");
    fit.residual_variance = residual_variance_of(fit.residuals);
    fit.mean_variance =
        mean_variance_closed_form(fit.peak, fit.residual_variance, bin_width);
    fit.epsilon = std::sqrt(fit.mean_variance) / sigma;
    // coverage conditions: the support should extend well past the peak
    fit.truncated_peak = (mu - x.front() < 3.0 * sigma) ||
                         (x.back() - mu < 3.0 * sigma);
    return fit;
}

inline GaussianFit fit_gaussian(const Histogram& hist, const FitOptions& opt = {}) {
    if (hist.empty())
        throw fit_error("fit_gaussian: empty histogram");
    std::vector<double> x = hist.bin_centers();
    std::vector<double> f(hist.counts.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = static_cast<double>(hist.counts[i]);
    return fit_gaussian_points(x, f, hist.bin_width, opt);
}

/// Unbiased pooled residual variance of a fit against a histogram, over the
/// same window the fit itself uses.
inline double residual_variance(const Histogram& hist, const GaussianFit& fit,
                                const FitOptions& opt = {}) {
    std::vector<double> res;
    const double win = opt.residual_window_sigmas * fit.peak.sigma;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double xi = hist.center(i);
        if (std::abs(xi - fit.peak.mean) > win) continue;
        res.push_back(static_cast<double>(hist.counts[i]) -
                      fit.peak.value_at(xi));
    }
    return residual_variance_of(res);
}

} // namespace qkdtiming
