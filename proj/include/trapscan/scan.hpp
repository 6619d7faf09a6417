#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trapscan/tensor_store.hpp"
#include "trapscan/trap_detector.hpp"

// Whole-checkpoint scanning with a worker pool over (layer, replicate)
// units. Seeds are derived per unit, so results do not depend on thread
// count or scheduling order.

namespace trapscan {

struct ScanOptions {
    std::int64_t replicates = 5;
    std::uint64_t base_seed = 0;
    double c_tw = 4.0;
    bool mean_instability = false;
    std::int64_t instability_trials = 10000;
    bool include_eigenvectors = false;  // embed trap eigenvectors in reports
    int threads = 0;                    // 0 = hardware default
};

struct SkippedLayer {
    std::string layer_id;
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::string reason;
};

struct CheckpointScanReport {
    std::string model_name;
    std::int64_t step = 0;
    std::map<std::string, std::string> metadata;
    std::vector<LayerTrapReport> layers;    // manifest order
    std::vector<SkippedLayer> skipped;      // 1-d tensors etc.
};

CheckpointScanReport scan_checkpoint(const Checkpoint& ckpt, const ScanOptions& options);

}  // namespace trapscan
