#include "trapscan/rmt.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "trapscan/numeric.hpp"

namespace trapscan {

namespace {

double clamp_unit(double x) { return std::min(1.0, std::max(-1.0, x)); }

// Antiderivative of sqrt((b-t)(t-a))/t for 0 < a <= t <= b; the sqrt(ab)
// term vanishes identically when a == 0.
double mp_antiderivative(double t, double a, double b) {
    const double s = a + b;
    const double width = b - a;
    const double r2 = (b - t) * (t - a);
    const double r = std::sqrt(std::max(0.0, r2));
    double value = r + 0.5 * s * std::asin(clamp_unit((2.0 * t - s) / width));
    const double ab = a * b;
    if (ab > 0.0) {
        const double root_ab = std::sqrt(ab);
        value -= root_ab * std::asin(clamp_unit((s * t - 2.0 * ab) / (t * width)));
    }
    return value;
}

}  // namespace

Esd covariance_spectrum(const WeightMatrix& w) {
    if (w.rows < 2 || w.cols < 2)
        raise(ErrorCode::Dimension,
              "layer '" + w.layer_id + "' needs both sides >= 2 for a spectrum (got " +
                  std::to_string(w.rows) + "x" + std::to_string(w.cols) + ")");
    w.validate_shape();

    // Orient tall: the 1/N normalization follows the long side, so Q >= 1.
    Eigen::MatrixXd a = w.map();
    if (a.rows() < a.cols()) a = a.transpose().eval();
    const std::int64_t n_long = a.rows();
    const std::int64_t m_short = a.cols();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    if (svd.info() != Eigen::Success)
        raise(ErrorCode::Numerical, "SVD failed to converge on layer '" + w.layer_id + "'");

    Esd esd;
    esd.N = n_long;
    esd.M = m_short;
    esd.Q = static_cast<double>(n_long) / static_cast<double>(m_short);
    esd.eigenvalues.resize(static_cast<std::size_t>(m_short));
    const auto& sv = svd.singularValues();  // descending
    for (std::int64_t i = 0; i < m_short; ++i) {
        const double s = sv(m_short - 1 - i);
        esd.eigenvalues[static_cast<std::size_t>(i)] = s * s / static_cast<double>(n_long);
    }
    // Ascending already; values below 1e-12 of the largest are noise-level
    // and clamp to exact zero.
    const double tol = 1e-12 * (esd.eigenvalues.empty() ? 0.0 : esd.eigenvalues.back());
    for (double& lambda : esd.eigenvalues)
        if (lambda < tol) lambda = 0.0;
    return esd;
}

std::pair<double, double> mp_edges(double sigma2, double Q) {
    if (!(sigma2 > 0.0)) raise(ErrorCode::Domain, "sigma2 must be positive");
    if (!(Q >= 1.0)) raise(ErrorCode::Domain, "Q must be >= 1");
    const double inv_sqrt_q = 1.0 / std::sqrt(Q);
    const double lo = sigma2 * (1.0 - inv_sqrt_q) * (1.0 - inv_sqrt_q);
    const double hi = sigma2 * (1.0 + inv_sqrt_q) * (1.0 + inv_sqrt_q);
    return {lo, hi};
}

double mp_density(double lambda, const MPFit& fit) {
    // Zero outside the open support; the edges map to zero (the sqrt factor
    // vanishes), which also covers the 1/lambda singularity when the lower
    // edge sits at zero (Q == 1).
    if (lambda <= fit.lambda_minus || lambda >= fit.lambda_plus) return 0.0;
    const double num = (fit.lambda_plus - lambda) * (lambda - fit.lambda_minus);
    return fit.Q / (2.0 * M_PI * fit.sigma2) * std::sqrt(num) / lambda;
}

double mp_cdf(double lambda, const MPFit& fit) {
    const double a = fit.lambda_minus;
    const double b = fit.lambda_plus;
    if (lambda <= a) return 0.0;
    if (lambda >= b) return 1.0;
    const double at_a = -0.25 * M_PI * (a + b) + (a > 0.0 ? 0.5 * M_PI * std::sqrt(a * b) : 0.0);
    const double raw = fit.Q / (2.0 * M_PI * fit.sigma2) * (mp_antiderivative(lambda, a, b) - at_a);
    return std::min(1.0, std::max(0.0, raw));
}

namespace {

// KS distance between the bulk law and the empirical CDF. Ranks come from
// the full sample, so outliers above the bulk cutoff keep their rank without
// entering the sup.
double ks_objective(const std::vector<double>& eigenvalues, std::size_t n_bulk,
                    double sigma2, double Q) {
    MPFit fit;
    fit.sigma2 = sigma2;
    fit.Q = Q;
    std::tie(fit.lambda_minus, fit.lambda_plus) = mp_edges(sigma2, Q);
    const double n = static_cast<double>(eigenvalues.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < n_bulk; ++i) {
        const double f = mp_cdf(eigenvalues[i], fit);
        const double hi = std::abs(f - static_cast<double>(i + 1) / n);
        const double lo = std::abs(f - static_cast<double>(i) / n);
        worst = std::max(worst, std::max(hi, lo));
    }
    return worst;
}

}  // namespace

MPFit fit_mp(const Esd& esd) {
    const std::size_t n = esd.eigenvalues.size();
    if (n < 10)
        raise(ErrorCode::Fit, "need at least 10 eigenvalues, got " + std::to_string(n));

    // Trim the top 1% so outliers do not bias the scale.
    const std::size_t n_bulk =
        static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
    if (n_bulk < 10)
        raise(ErrorCode::Fit, "bulk after trimming has fewer than 10 eigenvalues");

    const double seed_scale =
        mean_of(std::span<const double>(esd.eigenvalues.data(), n_bulk));
    if (!(seed_scale > 0.0)) raise(ErrorCode::Fit, "spectrum has no positive mass");

    const auto objective = [&](double sigma2) {
        return ks_objective(esd.eigenvalues, n_bulk, sigma2, esd.Q);
    };

    // Coarse multiplicative grid, then golden-section refinement. Both are
    // defined relative to seed_scale, which keeps the whole fit exactly
    // scale-equivariant.
    const double lo_factor = 0.01, hi_factor = 100.0;
    const int grid_points = 64;
    int best_idx = 0;
    double best_val = std::numeric_limits<double>::infinity();
    const double log_lo = std::log(lo_factor), log_hi = std::log(hi_factor);
    for (int i = 0; i < grid_points; ++i) {
        const double f = std::exp(log_lo + (log_hi - log_lo) * i / (grid_points - 1));
        const double val = objective(seed_scale * f);
        if (val < best_val) {
            best_val = val;
            best_idx = i;
        }
    }
    const auto grid_factor = [&](int i) {
        return std::exp(log_lo + (log_hi - log_lo) * std::clamp(i, 0, grid_points - 1) /
                        (grid_points - 1));
    };
    double lo = seed_scale * grid_factor(best_idx - 1);
    double hi = seed_scale * grid_factor(best_idx + 1);

    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    for (int iter = 0; iter < 90; ++iter) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = objective(x2);
        }
    }
    const double sigma2_hat = 0.5 * (lo + hi);

    MPFit fit;
    fit.sigma2 = sigma2_hat;
    fit.Q = esd.Q;
    std::tie(fit.lambda_minus, fit.lambda_plus) = mp_edges(sigma2_hat, esd.Q);
    fit.ks_distance = objective(sigma2_hat);
    fit.bulk_fraction_used = static_cast<double>(n_bulk) / static_cast<double>(n);
    return fit;
}

EdgeThreshold tw_delta(const MPFit& fit, std::int64_t N, double c_tw) {
    if (N < 2) raise(ErrorCode::Domain, "N must be >= 2");
    if (!(c_tw > 0.0)) raise(ErrorCode::Domain, "c_tw must be positive");
    if (!(fit.sigma2 > 0.0) || !(fit.Q >= 1.0))
        raise(ErrorCode::Domain, "invalid fit parameters");

    const double q_m = 1.0 + 1.0 / std::sqrt(fit.Q);
    const double q_p = 1.0 + std::sqrt(fit.Q);
    const double scale = std::pow(static_cast<double>(N), -2.0 / 3.0) * q_m * std::cbrt(q_p);

    EdgeThreshold edge;
    edge.c_tw = c_tw;
    edge.delta_tw = c_tw * fit.sigma2 * scale;
    edge.threshold = fit.lambda_plus + edge.delta_tw;
    return edge;
}

}  // namespace trapscan
