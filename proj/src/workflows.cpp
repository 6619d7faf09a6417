#include "trapscan/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trapscan/nn.hpp"

namespace trapscan {

std::vector<AblationResult> ablate_checkpoint(const Checkpoint& ckpt,
                                              const AblateOptions& options) {
    const WeightMatrix* layer = nullptr;
    for (const auto& candidate : ckpt.layers)
        if (candidate.layer_id == options.layer_id) layer = &candidate;
    if (!layer)
        raise(ErrorCode::LayerNotFound,
              "checkpoint has no layer '" + options.layer_id + "'");

    const MlpModel model = model_from_checkpoint(ckpt);

    const LayerTrapReport report =
        detect_traps(*layer, options.replicates, options.base_seed, options.c_tw);
    if (report.traps.empty())
        raise(ErrorCode::TrapNotFound,
              "layer '" + options.layer_id + "' has no detected traps");
    if (options.trap_index >= static_cast<std::int64_t>(report.traps.size()))
        raise(ErrorCode::TrapNotFound,
              "trap index " + std::to_string(options.trap_index) + " out of range (" +
                  std::to_string(report.traps.size()) + " traps)");

    ProbeConfig probes;
    probes.num_probes = options.num_probes;
    probes.temperature = options.temperature;
    probes.seed = options.seed;
    const auto meta_double = [&](const char* key) -> std::optional<double> {
        const auto it = ckpt.manifest.metadata.find(key);
        if (it == ckpt.manifest.metadata.end()) return std::nullopt;
        try {
            return std::stod(it->second);
        } catch (...) {
            return std::nullopt;
        }
    };
    probes.mean = options.probe_mean.value_or(meta_double("input_mean").value_or(0.0));
    probes.std = options.probe_std.value_or(meta_double("input_std").value_or(1.0));
    if (!(probes.std > 0.0)) probes.std = 1.0;

    std::optional<Dataset> eval;
    std::optional<double> base_error;
    if (options.eval_dataset.has_value()) {
        eval = load_dataset(*options.eval_dataset);
        base_error = 1.0 - evaluate(model, *eval).first;
    }

    std::vector<std::int64_t> selection;
    if (options.trap_index < 0) {
        selection.resize(report.traps.size());
        for (std::size_t i = 0; i < selection.size(); ++i)
            selection[i] = static_cast<std::int64_t>(i);
    } else {
        selection.push_back(options.trap_index);
    }

    std::vector<AblationResult> results;
    for (std::int64_t index : selection) {
        const TrapRecord& trap = report.traps[static_cast<std::size_t>(index)];
        const TrapRemoval removal = remove_trap(model, options.layer_id, trap, options.seed);

        AblationResult result;
        result.layer_id = options.layer_id;
        result.replicate_index = trap.replicate_index;
        result.trap_index = index;
        result.lambda_trap = trap.lambda_trap;
        result.ipr = trap.ipr;
        result.temperature = options.temperature;
        result.map_overlap = removal.overlap;
        result.jsd = jsd_score(model, removal.model, probes);
        if (eval.has_value()) {
            const double ablated_error = 1.0 - evaluate(removal.model, *eval).first;
            result.delta_test_error = ablated_error - *base_error;
        }
        result.classification =
            classify_trap(result.jsd, result.delta_test_error, options.tau_jsd, options.tau_err);
        results.push_back(std::move(result));
    }
    return results;
}

std::vector<std::int64_t> log_spaced_schedule(std::int64_t steps, std::int64_t points) {
    std::vector<std::int64_t> schedule = {0};
    if (steps > 0 && points > 1) {
        const double span = std::log(static_cast<double>(steps));
        for (std::int64_t i = 0; i < points - 1; ++i) {
            const double f = (points == 2) ? 1.0
                                           : static_cast<double>(i) /
                                                 static_cast<double>(points - 2);
            schedule.push_back(static_cast<std::int64_t>(
                std::llround(std::exp(span * f))));
        }
        schedule.push_back(steps);
    } else if (steps > 0) {
        schedule.push_back(steps);
    }
    std::sort(schedule.begin(), schedule.end());
    schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());
    return schedule;
}

std::string train_log_csv(const std::vector<LogRow>& log) {
    std::ostringstream out;
    out.precision(17);
    out << "step,train_acc,train_loss,eval_acc,eval_loss\n";
    for (const auto& row : log) {
        out << row.step << "," << row.train_acc << "," << row.train_loss << ",";
        if (row.eval_acc.has_value()) out << *row.eval_acc;
        out << ",";
        if (row.eval_loss.has_value()) out << *row.eval_loss;
        out << "\n";
    }
    return out.str();
}

TrainDemoResult run_train_demo(const TrainDemoConfig& config, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const Dataset train_data =
        make_gaussian_clusters(config.classes, config.input_dim, config.train_per_class,
                               config.noise, config.train.seed, config.separation, 0);
    const Dataset test_data =
        make_gaussian_clusters(config.classes, config.input_dim, config.test_per_class,
                               config.noise, config.train.seed, config.separation, 1);

    TrainDemoResult result;
    result.dataset_path = (fs::path(out_dir) / "dataset.json").string();
    save_dataset(test_data, result.dataset_path);

    std::vector<std::int64_t> widths = {config.input_dim};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(config.classes);
    MlpModel model = make_mlp(widths, config.train.init_scale, config.train.seed);

    TrainConfig train_config = config.train;
    train_config.checkpoint_schedule = log_spaced_schedule(config.train.steps, config.checkpoints);

    TrainRun run;
    run.eval = &test_data;
    run.checkpoint_dir = out_dir;
    run.model_name = "mlp-demo";
    const TrainResult trained = train(model, train_data, train_config, run);

    result.log_path = (fs::path(out_dir) / "train_log.csv").string();
    std::ofstream log(result.log_path, std::ios::trunc);
    if (!log) raise(ErrorCode::Io, "cannot write '" + result.log_path + "'");
    log << train_log_csv(trained.log);
    result.checkpoint_manifests = trained.checkpoint_paths;

    result.final_train_acc = evaluate(model, train_data).first;
    result.final_test_acc = evaluate(model, test_data).first;
    return result;
}

}  // namespace trapscan
