#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "trapscan/nn.hpp"
#include "trapscan/trap_detector.hpp"

// Trap removal and the data-free behavioral score: replace the trap-aligned
// rank-one singular component of the original layer with a random one of
// equal singular value, then measure the mean Jensen-Shannon divergence of
// the two models' temperature-scaled outputs on Gaussian probe inputs.

namespace trapscan {

struct ProbeConfig {
    std::int64_t num_probes = 1024;
    double mean = 0.0;
    double std = 1.0;
    std::uint64_t seed = 0;
    double temperature = 1.0;
};

enum class TrapClass { Harmful, Benign, Unlabeled };

const char* trap_class_name(TrapClass c);

struct TrapRemoval {
    MlpModel model;
    double overlap = 0.0;        // |<v_k*, v_trap>|, flagged ambiguous below 0.3
    std::int64_t singular_index = -1;
    double singular_value = 0.0;
    bool ambiguous = false;
};

struct AblationResult {
    std::string layer_id;
    std::int64_t replicate_index = 0;
    std::int64_t trap_index = 0;
    double lambda_trap = 0.0;
    double ipr = 0.0;
    double jsd = 0.0;
    double temperature = 1.0;
    double map_overlap = 0.0;
    std::optional<double> delta_test_error;  // err_ablated - err_original
    TrapClass classification = TrapClass::Unlabeled;
};

TrapRemoval remove_trap(const MlpModel& model, const std::string& layer_id,
                        const TrapRecord& trap, std::uint64_t seed);

double jsd_score(const MlpModel& model, const MlpModel& ablated,
                 const ProbeConfig& probes);

TrapClass classify_trap(double jsd, std::optional<double> delta_test_error,
                        double tau_jsd, double tau_err);

}  // namespace trapscan
