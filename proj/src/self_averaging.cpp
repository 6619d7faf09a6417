#include "trapscan/self_averaging.hpp"

#include <cmath>
#include <numeric>

#include "trapscan/numeric.hpp"
#include "trapscan/rng.hpp"
#include "trapscan/trap_detector.hpp"

namespace trapscan {

double constant_overlap(const std::vector<double>& v) {
    if (v.empty()) raise(ErrorCode::NotNormalized, "empty vector");
    double norm_sq = 0.0;
    double sum = 0.0;
    for (double x : v) {
        norm_sq += x * x;
        sum += x;
    }
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6)
        raise(ErrorCode::NotNormalized, "vector norm deviates from 1 by more than 1e-6");
    return std::abs(sum) / std::sqrt(static_cast<double>(v.size()));
}

MeanInstabilityReport mean_instability_bound(const WeightMatrix& a, const TrapRecord& trap) {
    a.validate_shape();
    if (static_cast<std::int64_t>(trap.eigenvector.size()) != a.cols)
        raise(ErrorCode::ShapeMismatch,
              "trap eigenvector length " + std::to_string(trap.eigenvector.size()) +
                  " does not match matrix columns " + std::to_string(a.cols));

    const std::int64_t n = a.rows;
    const std::int64_t m = a.cols;

    MeanInstabilityReport report;
    report.layer_id = a.layer_id;
    report.replicate_index = trap.replicate_index;
    report.lambda_trap = trap.lambda_trap;
    report.eta = constant_overlap(trap.eigenvector);

    std::vector<double> row_means(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        row_means[static_cast<std::size_t>(i)] =
            pairwise_sum(std::span<const double>(a.data.data() + i * m,
                                                 static_cast<std::size_t>(m))) /
            static_cast<double>(m);
    }
    report.bar_r = mean_of(row_means);

    std::vector<double> sq(row_means.size());
    for (std::size_t i = 0; i < row_means.size(); ++i) sq[i] = row_means[i] * row_means[i];
    report.row_mean_sq_avg = mean_of(sq);

    report.bound = report.eta * report.eta * report.lambda_trap / static_cast<double>(m) -
                   report.bar_r * report.bar_r;
    report.row_mean_variance = report.row_mean_sq_avg - report.bar_r * report.bar_r;

    // Both inequalities are exact for a true eigenpair; the slack only
    // absorbs floating-point residual.
    const double tol = 1e-9 * std::max(1.0, std::abs(report.lambda_trap) / static_cast<double>(m));
    if (report.row_mean_sq_avg <
        report.eta * report.eta * report.lambda_trap / static_cast<double>(m) - tol)
        raise(ErrorCode::Numerical,
              "row-mean second moment violates the instability bound; the supplied "
              "eigenpair is inconsistent with the matrix");
    if (report.row_mean_variance < report.bound - tol)
        raise(ErrorCode::Numerical,
              "row-mean variance violates the instability bound; the supplied "
              "eigenpair is inconsistent with the matrix");
    return report;
}

SampledVariance sampled_mean_variance(const WeightMatrix& a, std::int64_t s,
                                      std::int64_t trials, std::uint64_t seed) {
    a.validate_shape();
    if (s < 1 || s > a.cols)
        raise(ErrorCode::Domain, "sampling scale s must be in [1, cols]");
    if (trials < 100) raise(ErrorCode::Domain, "need at least 100 trials");

    const std::int64_t n = a.rows;
    const std::int64_t m = a.cols;
    std::vector<double> samples(static_cast<std::size_t>(trials));
    std::vector<std::int64_t> cols(static_cast<std::size_t>(m));

    for (std::int64_t t = 0; t < trials; ++t) {
        // Per-trial engine, so trials could run in parallel with identical
        // results.
        auto eng = rng::make_engine(rng::mix(seed, static_cast<std::uint64_t>(t)));
        const std::int64_t i = static_cast<std::int64_t>(rng::below(eng, static_cast<std::uint64_t>(n)));
        std::iota(cols.begin(), cols.end(), std::int64_t{0});
        // Partial Fisher-Yates: first s slots become the without-replacement draw.
        double acc = 0.0;
        for (std::int64_t k = 0; k < s; ++k) {
            const std::int64_t pick =
                k + static_cast<std::int64_t>(rng::below(eng, static_cast<std::uint64_t>(m - k)));
            std::swap(cols[static_cast<std::size_t>(k)], cols[static_cast<std::size_t>(pick)]);
            acc += a.at(i, cols[static_cast<std::size_t>(k)]);
        }
        samples[static_cast<std::size_t>(t)] = acc / static_cast<double>(s);
    }

    const double mean = mean_of(samples);
    std::vector<double> d2(samples.size()), d4(samples.size());
    for (std::size_t t = 0; t < samples.size(); ++t) {
        const double d = samples[t] - mean;
        d2[t] = d * d;
        d4[t] = d2[t] * d2[t];
    }
    const double m2 = mean_of(d2);
    const double m4 = mean_of(d4);

    SampledVariance out;
    out.trials = trials;
    out.value = pairwise_sum(d2) / static_cast<double>(trials - 1);  // unbiased
    out.standard_error =
        std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(trials));
    return out;
}

}  // namespace trapscan
