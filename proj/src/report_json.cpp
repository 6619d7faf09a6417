#include "trapscan/report_json.hpp"

#include <cmath>
#include <sstream>

#include "trapscan/workflows.hpp"

namespace trapscan {

namespace {

Json finite_or_null(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

}  // namespace

Json options_to_json(const ScanOptions& options) {
    Json j;
    j["replicates"] = options.replicates;
    j["base_seed"] = options.base_seed;
    j["c_tw"] = options.c_tw;
    j["mean_instability"] = options.mean_instability;
    j["instability_trials"] = options.instability_trials;
    j["include_eigenvectors"] = options.include_eigenvectors;
    j["threads"] = options.threads;
    return j;
}

Json mp_fit_to_json(const MPFit& fit) {
    Json j;
    j["sigma2"] = fit.sigma2;
    j["Q"] = fit.Q;
    j["lambda_minus"] = fit.lambda_minus;
    j["lambda_plus"] = fit.lambda_plus;
    j["ks_distance"] = fit.ks_distance;
    j["bulk_fraction_used"] = fit.bulk_fraction_used;
    return j;
}

Json trap_to_json(const TrapRecord& trap, bool include_eigenvector) {
    Json j;
    j["layer_id"] = trap.layer_id;
    j["replicate"] = trap.replicate_index;
    j["lambda"] = trap.lambda_trap;
    j["gap_over_edge"] = trap.gap_over_edge;
    j["ipr"] = trap.ipr;
    j["top_k_mass"] = Json::object();
    for (const auto& [k, mass] : trap.top_k_mass)
        j["top_k_mass"][std::to_string(k)] = mass;
    j["constant_overlap"] = trap.constant_overlap;
    if (include_eigenvector) j["eigenvector"] = trap.eigenvector;
    return j;
}

Json instability_to_json(const MeanInstabilityReport& report) {
    Json j;
    j["layer_id"] = report.layer_id;
    j["replicate"] = report.replicate_index;
    j["eta"] = report.eta;
    j["lambda_trap"] = report.lambda_trap;
    j["row_mean_sq_avg"] = report.row_mean_sq_avg;
    j["bar_r"] = report.bar_r;
    j["bound"] = report.bound;
    j["row_mean_variance"] = report.row_mean_variance;
    j["sampled_variance"] = Json::object();
    for (const auto& [s, mc] : report.sampled_variance) {
        Json entry;
        entry["value"] = mc.value;
        entry["standard_error"] = mc.standard_error;
        entry["trials"] = mc.trials;
        j["sampled_variance"][std::to_string(s)] = std::move(entry);
    }
    return j;
}

Json layer_report_to_json(const LayerTrapReport& report, const ScanOptions& options) {
    Json j;
    j["layer_id"] = report.layer_id;
    j["rows"] = report.rows;
    j["cols"] = report.cols;
    j["replicates"] = report.replicates;

    Json counts = Json::array();
    for (const auto& outcome : report.outcomes) {
        if (outcome.ok)
            counts.push_back(outcome.trap_count);
        else
            counts.push_back(nullptr);
    }
    j["trap_count_per_replicate"] = std::move(counts);
    j["valid_replicates"] = report.valid_replicates();
    j["mean_count"] = finite_or_null(report.mean_count());
    j["std_count"] = finite_or_null(report.std_count());
    j["condensation_ratio"] = finite_or_null(report.condensation_ratio());

    j["mp_fits"] = Json::array();
    for (const auto& outcome : report.outcomes) {
        if (!outcome.ok) continue;
        Json fit = mp_fit_to_json(outcome.fit);
        fit["replicate"] = outcome.replicate_index;
        fit["delta_tw"] = outcome.edge.delta_tw;
        fit["threshold"] = outcome.edge.threshold;
        fit["max_eigenvalue"] = outcome.max_eigenvalue;
        j["mp_fits"].push_back(std::move(fit));
    }

    j["traps"] = Json::array();
    for (const auto& trap : report.traps)
        j["traps"].push_back(trap_to_json(trap, options.include_eigenvectors));

    if (options.mean_instability) {
        j["mean_instability"] = Json::array();
        for (const auto& inst : report.instability)
            j["mean_instability"].push_back(instability_to_json(inst));
    }

    j["failures"] = Json::array();
    for (const auto& outcome : report.outcomes) {
        if (outcome.ok) continue;
        Json failure;
        failure["replicate"] = outcome.replicate_index;
        failure["error"] = outcome.error;
        j["failures"].push_back(std::move(failure));
    }
    return j;
}

Json scan_report_to_json(const CheckpointScanReport& report, const ScanOptions& options) {
    Json j;
    j["schema"] = kScanReportSchema;
    j["model_name"] = report.model_name;
    j["step"] = report.step;
    j["options"] = options_to_json(options);
    j["metadata"] = Json::object();
    for (const auto& [key, value] : report.metadata) j["metadata"][key] = value;
    j["layers"] = Json::array();
    for (const auto& layer : report.layers)
        j["layers"].push_back(layer_report_to_json(layer, options));
    j["skipped"] = Json::array();
    for (const auto& skipped : report.skipped) {
        Json entry;
        entry["layer_id"] = skipped.layer_id;
        entry["rows"] = skipped.rows;
        entry["cols"] = skipped.cols;
        entry["reason"] = skipped.reason;
        j["skipped"].push_back(std::move(entry));
    }
    return j;
}

Json ablation_to_json(const AblationResult& result) {
    Json j;
    j["layer_id"] = result.layer_id;
    j["replicate"] = result.replicate_index;
    j["trap_index"] = result.trap_index;
    j["lambda"] = result.lambda_trap;
    j["ipr"] = result.ipr;
    j["jsd"] = result.jsd;
    j["temperature"] = result.temperature;
    j["map_overlap"] = result.map_overlap;
    j["ambiguous_mapping"] = result.map_overlap < 0.3;
    if (result.delta_test_error.has_value())
        j["delta_test_error"] = *result.delta_test_error;
    else
        j["delta_test_error"] = nullptr;
    j["classification"] = trap_class_name(result.classification);
    return j;
}

Json ablation_array_to_json(const std::vector<AblationResult>& results,
                            const AblateOptions* options) {
    Json j;
    j["schema"] = kAblationResultSchema;
    if (options) {
        Json echo;
        echo["layer_id"] = options->layer_id;
        echo["trap_index"] = options->trap_index;
        echo["replicates"] = options->replicates;
        echo["base_seed"] = options->base_seed;
        echo["c_tw"] = options->c_tw;
        echo["num_probes"] = options->num_probes;
        echo["temperature"] = options->temperature;
        echo["probe_mean"] =
            options->probe_mean ? Json(*options->probe_mean) : Json(nullptr);
        echo["probe_std"] = options->probe_std ? Json(*options->probe_std) : Json(nullptr);
        echo["eval_dataset"] =
            options->eval_dataset ? Json(*options->eval_dataset) : Json(nullptr);
        echo["tau_err"] = options->tau_err;
        echo["tau_jsd"] = options->tau_jsd;
        echo["seed"] = options->seed;
        j["options"] = std::move(echo);
    }
    j["results"] = Json::array();
    for (const auto& result : results) j["results"].push_back(ablation_to_json(result));
    return j;
}

std::string ablation_csv(const std::vector<AblationResult>& results) {
    std::ostringstream out;
    out << "trap_id,layer,lambda,ipr,jsd,delta_err,class\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out << i << "," << r.layer_id << "," << r.lambda_trap << "," << r.ipr << ","
            << r.jsd << ",";
        if (r.delta_test_error.has_value()) out << *r.delta_test_error;
        out << "," << trap_class_name(r.classification) << "\n";
    }
    return out.str();
}

}  // namespace trapscan
