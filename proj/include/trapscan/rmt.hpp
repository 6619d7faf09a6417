#pragma once

#include <cstdint>
#include <vector>

#include "trapscan/matrix.hpp"

// Spectral machinery for the randomized baseline: empirical covariance
// spectra, the limiting bulk law for i.i.d.-entry matrices, and the
// finite-size edge-fluctuation threshold used to flag outliers.

namespace trapscan {

// Eigenvalues of X = (1/N) W^T W with the wide case transposed so the
// aspect ratio Q = N/M is always >= 1 (N follows the long side).
struct Esd {
    std::vector<double> eigenvalues;  // ascending, length M
    double Q = 1.0;
    std::int64_t N = 0;  // long side
    std::int64_t M = 0;  // short side

    double max_eigenvalue() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }
};

struct MPFit {
    double sigma2 = 0.0;
    double Q = 1.0;
    double lambda_minus = 0.0;
    double lambda_plus = 0.0;
    double ks_distance = 1.0;
    double bulk_fraction_used = 1.0;
};

struct EdgeThreshold {
    double delta_tw = 0.0;
    double c_tw = 0.0;
    double threshold = 0.0;  // lambda_plus + delta_tw
};

Esd covariance_spectrum(const WeightMatrix& w);

// Density of the limiting bulk law; zero outside [lambda_minus, lambda_plus].
double mp_density(double lambda, const MPFit& fit);

// CDF of the bulk law in closed form (mass 1 on the support for Q >= 1).
double mp_cdf(double lambda, const MPFit& fit);

std::pair<double, double> mp_edges(double sigma2, double Q);

// Fits sigma^2 by minimizing the Kolmogorov-Smirnov distance between the
// bulk-law CDF and the empirical CDF, with the top 1% of eigenvalues
// excluded from the sup so that outliers do not bias the scale.
MPFit fit_mp(const Esd& esd);

// Threshold = lambda_plus + c_tw * sigma^2 * N^{-2/3} (1 + Q^{-1/2}) (1 + Q^{1/2})^{1/3},
// the standard largest-eigenvalue fluctuation scale for sample covariance.
EdgeThreshold tw_delta(const MPFit& fit, std::int64_t N, double c_tw);

}  // namespace trapscan
