#include "trapscan/scan.hpp"

#include <atomic>
#include <thread>

namespace trapscan {

CheckpointScanReport scan_checkpoint(const Checkpoint& ckpt, const ScanOptions& options) {
    if (options.replicates < 1) raise(ErrorCode::Domain, "replicates must be >= 1");

    CheckpointScanReport report;
    report.model_name = ckpt.manifest.model_name;
    report.step = ckpt.manifest.step;
    report.metadata = ckpt.manifest.metadata;

    DetectOptions detect;
    detect.replicates = options.replicates;
    detect.base_seed = options.base_seed;
    detect.c_tw = options.c_tw;
    detect.mean_instability = options.mean_instability;
    detect.instability_trials = options.instability_trials;

    std::vector<const WeightMatrix*> analyzable;
    for (const auto& layer : ckpt.layers) {
        if (layer.rows < 2 || layer.cols < 2) {
            report.skipped.push_back(
                {layer.layer_id, layer.rows, layer.cols,
                 "spectral analysis needs both sides >= 2"});
        } else if (std::min(layer.rows, layer.cols) < 10) {
            report.skipped.push_back(
                {layer.layer_id, layer.rows, layer.cols,
                 "bulk fit needs at least 10 eigenvalues"});
        } else {
            analyzable.push_back(&layer);
        }
    }

    // One work unit per (layer, replicate); seeds are derived per unit, so
    // the assembled report is independent of thread count and scheduling.
    struct Unit {
        std::size_t layer;
        std::int64_t replicate;
    };
    std::vector<Unit> units;
    for (std::size_t l = 0; l < analyzable.size(); ++l)
        for (std::int64_t r = 0; r < options.replicates; ++r) units.push_back({l, r});

    std::vector<std::vector<ReplicateResult>> results(analyzable.size());
    for (auto& slot : results)
        slot.resize(static_cast<std::size_t>(options.replicates));

    unsigned workers = options.threads > 0
                           ? static_cast<unsigned>(options.threads)
                           : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, std::max<std::size_t>(1, units.size()));

    if (workers <= 1) {
        for (const Unit& unit : units)
            results[unit.layer][static_cast<std::size_t>(unit.replicate)] =
                run_replicate(*analyzable[unit.layer], unit.replicate, detect);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= units.size()) return;
                    const Unit& unit = units[i];
                    results[unit.layer][static_cast<std::size_t>(unit.replicate)] =
                        run_replicate(*analyzable[unit.layer], unit.replicate, detect);
                }
            });
        }
        for (auto& worker : pool) worker.join();
    }

    for (std::size_t l = 0; l < analyzable.size(); ++l) {
        const WeightMatrix& layer = *analyzable[l];
        LayerTrapReport layer_report;
        layer_report.layer_id = layer.layer_id;
        layer_report.rows = layer.rows;
        layer_report.cols = layer.cols;
        layer_report.replicates = options.replicates;
        for (auto& result : results[l]) {
            layer_report.outcomes.push_back(result.outcome);
            for (auto& trap : result.traps) layer_report.traps.push_back(std::move(trap));
            for (auto& inst : result.instability)
                layer_report.instability.push_back(std::move(inst));
        }
        report.layers.push_back(std::move(layer_report));
    }
    return report;
}

}  // namespace trapscan
