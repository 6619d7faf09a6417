#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trapscan/matrix.hpp"
#include "trapscan/rmt.hpp"
#include "trapscan/self_averaging.hpp"

// Shuffled-spectrum outlier detection: shuffle a layer entry-wise, fit the
// randomized spectrum's bulk, and record every eigenvalue that clears the
// edge threshold together with its eigenvector and localization metrics.

namespace trapscan {

struct ShuffleSeed {
    std::uint64_t seed = 0;
    std::int64_t replicate_index = 0;
};

struct TrapRecord {
    std::string layer_id;
    double lambda_trap = 0.0;
    std::vector<double> eigenvector;  // unit norm, length M (short side)
    double gap_over_edge = 0.0;       // lambda_trap - lambda_plus
    double ipr = 0.0;
    std::map<std::int64_t, double> top_k_mass;
    double constant_overlap = 0.0;    // |<v, 1/sqrt(M)>|
    std::int64_t replicate_index = 0;
};

struct LocalizationMetrics {
    double ipr = 0.0;
    std::map<std::int64_t, double> top_k_mass;  // k in {1, 5, ceil(0.05 M)}
};

struct ReplicateOutcome {
    std::int64_t replicate_index = 0;
    bool ok = false;
    std::string error;  // set when !ok
    MPFit fit;
    EdgeThreshold edge;
    double max_eigenvalue = 0.0;
    double condensation_ratio = 0.0;
    std::int64_t trap_count = 0;
};

struct LayerTrapReport {
    std::string layer_id;
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t replicates = 0;
    std::vector<ReplicateOutcome> outcomes;          // length replicates
    std::vector<TrapRecord> traps;                   // replicate asc, lambda desc
    std::vector<MeanInstabilityReport> instability;  // parallel to traps when requested

    std::vector<double> valid_counts() const;
    std::int64_t valid_replicates() const;
    double mean_count() const;  // over valid replicates; NaN if none
    double std_count() const;   // population std over valid replicates
    double condensation_ratio() const;  // mean over valid replicates
};

struct DetectOptions {
    std::int64_t replicates = 5;
    std::uint64_t base_seed = 0;
    double c_tw = 4.0;
    bool mean_instability = false;      // attach row-mean instability reports
    std::int64_t instability_trials = 10000;
};

// Per-layer shuffle seed; replicate r uses ShuffleSeed{layer_seed(..), r}.
std::uint64_t layer_seed(std::uint64_t base_seed, const std::string& layer_id);

// Deterministic seed for one (base_seed, layer, replicate) work unit.
std::uint64_t replicate_seed(std::uint64_t base_seed, const std::string& layer_id,
                             std::int64_t replicate_index);

// Uniform random permutation (Fisher-Yates) of the flattened entries.
WeightMatrix shuffle_entries(const WeightMatrix& w, const ShuffleSeed& seed);

LayerTrapReport detect_traps(const WeightMatrix& w, std::int64_t replicates,
                             std::uint64_t base_seed, double c_tw);
LayerTrapReport detect_traps(const WeightMatrix& w, const DetectOptions& options);

// Single (layer, replicate) work unit; detect_traps and the parallel scanner
// both assemble from this so results are independent of scheduling.
struct ReplicateResult {
    ReplicateOutcome outcome;
    std::vector<TrapRecord> traps;
    std::vector<MeanInstabilityReport> instability;
};
ReplicateResult run_replicate(const WeightMatrix& w, std::int64_t replicate_index,
                              const DetectOptions& options);

LocalizationMetrics localization_metrics(const std::vector<double>& v);

double condensation_ratio(const Esd& esd);  // lambda_max / mean(lambda)

std::pair<double, double> scale_perturbation_check(const WeightMatrix& w, double scale,
                                                   std::int64_t replicates,
                                                   std::uint64_t base_seed, double c_tw);

}  // namespace trapscan
