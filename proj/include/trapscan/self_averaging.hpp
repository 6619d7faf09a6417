#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trapscan/matrix.hpp"

// Row-mean instability checks: an outlier eigenpair of X(A) = (1/N) A^T A
// that overlaps the constant direction forces a lower bound on the variance
// of row means, and hence on the variance of sampled block means at every
// sampling scale.

namespace trapscan {

struct TrapRecord;

struct SampledVariance {
    double value = 0.0;
    double standard_error = 0.0;
    std::int64_t trials = 0;
};

struct MeanInstabilityReport {
    std::string layer_id;
    std::int64_t replicate_index = 0;
    double eta = 0.0;               // |<v, 1/sqrt(M)>|
    double lambda_trap = 0.0;
    double row_mean_sq_avg = 0.0;   // (1/N) sum r_i^2
    double bar_r = 0.0;             // mean of row means
    double bound = 0.0;             // eta^2 lambda / M - bar_r^2
    double row_mean_variance = 0.0; // (1/N) sum r_i^2 - bar_r^2
    std::map<std::int64_t, SampledVariance> sampled_variance;  // by scale s
};

// |sum v_j| / sqrt(M) for a unit vector.
double constant_overlap(const std::vector<double>& v);

// Verifies both inequalities for the eigenpair found in the shuffled matrix
// `a`; raises ShapeMismatch if the eigenvector length is not a.cols.
MeanInstabilityReport mean_instability_bound(const WeightMatrix& a, const TrapRecord& trap);

// Monte-Carlo Var(mu_{I,J} | A): I uniform over rows, J a uniform size-s
// column subset drawn without replacement, mu the mean of row I over J.
SampledVariance sampled_mean_variance(const WeightMatrix& a, std::int64_t s,
                                      std::int64_t trials, std::uint64_t seed);

}  // namespace trapscan
