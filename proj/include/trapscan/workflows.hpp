#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trapscan/ablation.hpp"
#include "trapscan/scan.hpp"

// End-to-end flows shared by the C API and the command-line tool.

namespace trapscan {

struct AblateOptions {
    std::string layer_id;
    std::int64_t trap_index = 0;  // -1 = every detected trap
    std::int64_t replicates = 5;
    std::uint64_t base_seed = 0;
    double c_tw = 4.0;
    std::int64_t num_probes = 1024;
    double temperature = 1.0;
    std::optional<double> probe_mean;  // default: metadata input_mean, else 0
    std::optional<double> probe_std;   // default: metadata input_std, else 1
    std::optional<std::string> eval_dataset;
    double tau_err = 0.01;
    double tau_jsd = 0.05;  // reported only; labels follow the error change
    std::uint64_t seed = 0;
};

// Fresh scan of the named layer, then removal + scoring of the selected
// trap(s). Raises TrapNotFound when the selector is out of range or the
// layer has no detected traps.
std::vector<AblationResult> ablate_checkpoint(const Checkpoint& ckpt,
                                              const AblateOptions& options);

struct TrainDemoConfig {
    std::int64_t classes = 10;  // output layer stays above the bulk-fit minimum
    std::int64_t input_dim = 16;
    std::int64_t train_per_class = 50;
    std::int64_t test_per_class = 100;
    double noise = 0.25;
    double separation = 2.0;
    std::vector<std::int64_t> hidden = {32, 32};
    TrainConfig train;  // steps default set below
    std::int64_t checkpoints = 12;  // log-spaced, always includes step 0

    TrainDemoConfig() {
        train.learning_rate = 5e-4;
        train.batch_size = 64;
        train.steps = 20000;
        train.init_scale = 8.0;
    }
};

struct TrainDemoResult {
    std::string dataset_path;
    std::string log_path;
    std::vector<std::string> checkpoint_manifests;
    double final_train_acc = 0.0;
    double final_test_acc = 0.0;
};

std::vector<std::int64_t> log_spaced_schedule(std::int64_t steps, std::int64_t points);

TrainDemoResult run_train_demo(const TrainDemoConfig& config, const std::string& out_dir);

std::string train_log_csv(const std::vector<LogRow>& log);

}  // namespace trapscan
