#include "trapscan/trap_detector.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "trapscan/numeric.hpp"
#include "trapscan/rng.hpp"

namespace trapscan {

std::uint64_t layer_seed(std::uint64_t base_seed, const std::string& layer_id) {
    return rng::mix(base_seed, rng::fnv1a(layer_id));
}

std::uint64_t replicate_seed(std::uint64_t base_seed, const std::string& layer_id,
                             std::int64_t replicate_index) {
    return rng::mix(layer_seed(base_seed, layer_id),
                    static_cast<std::uint64_t>(replicate_index));
}

WeightMatrix shuffle_entries(const WeightMatrix& w, const ShuffleSeed& seed) {
    w.validate_shape();
    WeightMatrix out = w;
    out.source = w.source + "#shuffled";
    // Permutation depends on (seed, replicate, shape) and nothing else, so
    // scaling the data never changes which entry lands where.
    auto eng = rng::make_engine(
        rng::mix(rng::mix(seed.seed, static_cast<std::uint64_t>(seed.replicate_index)),
                 rng::mix(static_cast<std::uint64_t>(w.rows),
                          static_cast<std::uint64_t>(w.cols))));
    for (std::size_t i = out.data.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng::below(eng, i + 1));
        std::swap(out.data[i], out.data[j]);
    }
    return out;
}

LocalizationMetrics localization_metrics(const std::vector<double>& v) {
    const std::size_t m = v.size();
    if (m == 0) raise(ErrorCode::NotNormalized, "empty vector");
    double norm_sq = 0.0;
    double ipr = 0.0;
    std::vector<double> sq(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double s = v[j] * v[j];
        sq[j] = s;
        norm_sq += s;
        ipr += s * s;
    }
    if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-6)
        raise(ErrorCode::NotNormalized, "vector norm deviates from 1 by more than 1e-6");

    std::sort(sq.begin(), sq.end(), std::greater<double>());
    LocalizationMetrics metrics;
    metrics.ipr = ipr;
    const std::int64_t m_i = static_cast<std::int64_t>(m);
    std::vector<std::int64_t> ks = {
        1, 5, static_cast<std::int64_t>(std::ceil(0.05 * static_cast<double>(m_i)))};
    for (std::int64_t k : ks) {
        k = std::clamp<std::int64_t>(k, 1, m_i);
        if (metrics.top_k_mass.count(k)) continue;
        double mass = 0.0;
        for (std::int64_t j = 0; j < k; ++j) mass += sq[static_cast<std::size_t>(j)];
        metrics.top_k_mass[k] = mass;
    }
    return metrics;
}

double condensation_ratio(const Esd& esd) {
    if (esd.eigenvalues.empty()) raise(ErrorCode::ZeroTrace, "empty spectrum");
    const double mean =
        mean_of(std::span<const double>(esd.eigenvalues.data(), esd.eigenvalues.size()));
    if (!(mean > 0.0)) raise(ErrorCode::ZeroTrace, "spectrum has zero trace");
    return esd.max_eigenvalue() / mean;
}

namespace {

Eigen::MatrixXd oriented(const WeightMatrix& w) {
    Eigen::MatrixXd a = w.map();
    if (a.rows() < a.cols()) a = a.transpose().eval();
    return a;
}

Esd esd_from_singular_values(const Eigen::VectorXd& sv, std::int64_t n_long,
                             std::int64_t m_short) {
    Esd esd;
    esd.N = n_long;
    esd.M = m_short;
    esd.Q = static_cast<double>(n_long) / static_cast<double>(m_short);
    esd.eigenvalues.resize(static_cast<std::size_t>(m_short));
    for (std::int64_t i = 0; i < m_short; ++i) {
        const double s = sv(m_short - 1 - i);
        esd.eigenvalues[static_cast<std::size_t>(i)] = s * s / static_cast<double>(n_long);
    }
    return esd;
}

std::int64_t count_above(const Esd& esd, double threshold) {
    std::int64_t count = 0;
    for (auto it = esd.eigenvalues.rbegin(); it != esd.eigenvalues.rend(); ++it) {
        if (*it > threshold)
            ++count;
        else
            break;
    }
    return count;
}

}  // namespace

ReplicateResult run_replicate(const WeightMatrix& w, std::int64_t replicate_index,
                              const DetectOptions& options) {
    ReplicateResult result;
    result.outcome.replicate_index = replicate_index;
    try {
        const WeightMatrix shuffled = shuffle_entries(
            w, {layer_seed(options.base_seed, w.layer_id), replicate_index});

        const Eigen::MatrixXd a = oriented(shuffled);
        const std::int64_t n_long = a.rows();
        const std::int64_t m_short = a.cols();
        if (n_long < 2 || m_short < 2)
            raise(ErrorCode::Dimension, "layer '" + w.layer_id + "' too small for a spectrum");

        // Pass 1: singular values only; vectors are computed only when an
        // outlier is actually present.
        Eigen::BDCSVD<Eigen::MatrixXd> svd_values(a);
        if (svd_values.info() != Eigen::Success)
            raise(ErrorCode::Numerical, "SVD failed to converge");
        Esd esd = esd_from_singular_values(svd_values.singularValues(), n_long, m_short);

        MPFit fit = fit_mp(esd);
        EdgeThreshold edge = tw_delta(fit, esd.N, options.c_tw);

        std::int64_t trap_count = count_above(esd, edge.threshold);
        if (trap_count > 0) {
            // Pass 2: recompute with vectors and recount from its values so
            // eigenpairs stay mutually consistent.
            Eigen::BDCSVD<Eigen::MatrixXd> svd_full(a, Eigen::ComputeThinV);
            if (svd_full.info() != Eigen::Success)
                raise(ErrorCode::Numerical, "SVD failed to converge");
            esd = esd_from_singular_values(svd_full.singularValues(), n_long, m_short);
            trap_count = count_above(esd, edge.threshold);

            for (std::int64_t t = 0; t < trap_count; ++t) {
                TrapRecord trap;
                trap.layer_id = w.layer_id;
                trap.replicate_index = replicate_index;
                trap.lambda_trap = esd.eigenvalues[static_cast<std::size_t>(m_short - 1 - t)];
                if (!(trap.lambda_trap > edge.threshold))
                    raise(ErrorCode::Internal, "trap record at or below its threshold");
                trap.gap_over_edge = trap.lambda_trap - fit.lambda_plus;
                trap.eigenvector.resize(static_cast<std::size_t>(m_short));
                for (std::int64_t j = 0; j < m_short; ++j)
                    trap.eigenvector[static_cast<std::size_t>(j)] = svd_full.matrixV()(j, t);
                const LocalizationMetrics loc = localization_metrics(trap.eigenvector);
                trap.ipr = loc.ipr;
                trap.top_k_mass = loc.top_k_mass;
                trap.constant_overlap = constant_overlap(trap.eigenvector);
                result.traps.push_back(std::move(trap));
            }

            if (options.mean_instability) {
                const WeightMatrix a_mat =
                    from_eigen(w.layer_id, a, shuffled.source + "#oriented");
                for (std::size_t t = 0; t < result.traps.size(); ++t) {
                    MeanInstabilityReport report =
                        mean_instability_bound(a_mat, result.traps[t]);
                    const std::uint64_t mi_seed = rng::mix(
                        replicate_seed(options.base_seed, w.layer_id, replicate_index),
                        static_cast<std::uint64_t>(t) + 0x5157u);
                    for (std::int64_t s :
                         {std::int64_t{1}, std::max<std::int64_t>(1, m_short / 2), m_short}) {
                        if (report.sampled_variance.count(s)) continue;
                        report.sampled_variance[s] = sampled_mean_variance(
                            a_mat, s, options.instability_trials, rng::mix(mi_seed, static_cast<std::uint64_t>(s)));
                    }
                    result.instability.push_back(std::move(report));
                }
            }
        }

        result.outcome.ok = true;
        result.outcome.fit = fit;
        result.outcome.edge = edge;
        result.outcome.max_eigenvalue = esd.max_eigenvalue();
        result.outcome.condensation_ratio = condensation_ratio(esd);
        result.outcome.trap_count = trap_count;
    } catch (const Error& e) {
        result.outcome.ok = false;
        result.outcome.error = e.what();
        result.traps.clear();
        result.instability.clear();
    } catch (const std::exception& e) {
        result.outcome.ok = false;
        result.outcome.error = std::string("InternalError: ") + e.what();
        result.traps.clear();
        result.instability.clear();
    }
    return result;
}

LayerTrapReport detect_traps(const WeightMatrix& w, const DetectOptions& options) {
    if (options.replicates < 1) raise(ErrorCode::Domain, "replicates must be >= 1");
    w.validate_shape();

    LayerTrapReport report;
    report.layer_id = w.layer_id;
    report.rows = w.rows;
    report.cols = w.cols;
    report.replicates = options.replicates;
    for (std::int64_t r = 0; r < options.replicates; ++r) {
        ReplicateResult result = run_replicate(w, r, options);
        report.outcomes.push_back(result.outcome);
        for (auto& trap : result.traps) report.traps.push_back(std::move(trap));
        for (auto& inst : result.instability) report.instability.push_back(std::move(inst));
    }
    return report;
}

LayerTrapReport detect_traps(const WeightMatrix& w, std::int64_t replicates,
                             std::uint64_t base_seed, double c_tw) {
    DetectOptions options;
    options.replicates = replicates;
    options.base_seed = base_seed;
    options.c_tw = c_tw;
    return detect_traps(w, options);
}

std::vector<double> LayerTrapReport::valid_counts() const {
    std::vector<double> counts;
    for (const auto& outcome : outcomes)
        if (outcome.ok) counts.push_back(static_cast<double>(outcome.trap_count));
    return counts;
}

std::int64_t LayerTrapReport::valid_replicates() const {
    return static_cast<std::int64_t>(valid_counts().size());
}

double LayerTrapReport::mean_count() const {
    const auto counts = valid_counts();
    if (counts.empty()) return std::numeric_limits<double>::quiet_NaN();
    return mean_of(counts);
}

double LayerTrapReport::std_count() const {
    const auto counts = valid_counts();
    if (counts.empty()) return std::numeric_limits<double>::quiet_NaN();
    return population_std(counts);
}

double LayerTrapReport::condensation_ratio() const {
    std::vector<double> ratios;
    for (const auto& outcome : outcomes)
        if (outcome.ok) ratios.push_back(outcome.condensation_ratio);
    if (ratios.empty()) return std::numeric_limits<double>::quiet_NaN();
    return mean_of(ratios);
}

std::pair<double, double> scale_perturbation_check(const WeightMatrix& w, double scale,
                                                   std::int64_t replicates,
                                                   std::uint64_t base_seed, double c_tw) {
    if (!(scale > 0.0)) raise(ErrorCode::Domain, "scale must be positive");
    const LayerTrapReport original = detect_traps(w, replicates, base_seed, c_tw);

    WeightMatrix scaled = w;
    for (double& x : scaled.data) x *= scale;
    const LayerTrapReport rescaled = detect_traps(scaled, replicates, base_seed, c_tw);

    return {original.mean_count(), rescaled.mean_count()};
}

}  // namespace trapscan
