#include "trapscan.h"

#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "trapscan/report_json.hpp"
#include "trapscan/tensor_store.hpp"
#include "trapscan/workflows.hpp"

using trapscan::Checkpoint;
using trapscan::Error;
using trapscan::ErrorCode;

struct ts_checkpoint {
    Checkpoint value;
};

struct ts_report {
    trapscan::CheckpointScanReport value;
    trapscan::ScanOptions options;
};

namespace {

thread_local std::string g_last_error = "ok";

ts_status code_to_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io: return TS_ERR_IO;
        case ErrorCode::MalformedManifest: return TS_ERR_MALFORMED_MANIFEST;
        case ErrorCode::TensorBounds: return TS_ERR_TENSOR_BOUNDS;
        case ErrorCode::NonFiniteEntry: return TS_ERR_NON_FINITE;
        case ErrorCode::Dimension: return TS_ERR_DIMENSION;
        case ErrorCode::Numerical: return TS_ERR_NUMERICAL;
        case ErrorCode::Fit: return TS_ERR_FIT;
        case ErrorCode::Domain: return TS_ERR_DOMAIN;
        case ErrorCode::NotNormalized: return TS_ERR_NOT_NORMALIZED;
        case ErrorCode::ZeroTrace: return TS_ERR_ZERO_TRACE;
        case ErrorCode::ShapeMismatch: return TS_ERR_SHAPE_MISMATCH;
        case ErrorCode::LayerNotFound: return TS_ERR_LAYER_NOT_FOUND;
        case ErrorCode::DegenerateSvd: return TS_ERR_DEGENERATE_SVD;
        case ErrorCode::TrapNotFound: return TS_ERR_TRAP_NOT_FOUND;
        case ErrorCode::Divergence: return TS_ERR_DIVERGENCE;
        case ErrorCode::Internal: return TS_ERR_INTERNAL;
    }
    return TS_ERR_INTERNAL;
}

template <typename Fn>
ts_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error = "ok";
        return TS_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return code_to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return TS_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return TS_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ts_status require_args(bool ok, const char* message) {
    if (ok) return TS_OK;
    g_last_error = message;
    return TS_ERR_USAGE;
}

nlohmann::json parse_options(const char* options_json) {
    if (!options_json || std::string(options_json).empty()) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(options_json);
    } catch (const nlohmann::json::exception& e) {
        trapscan::raise(ErrorCode::Domain, "options are not valid JSON: " + std::string(e.what()));
    }
}

trapscan::ScanOptions scan_options_from_json(const nlohmann::json& j) {
    trapscan::ScanOptions options;
    options.replicates = j.value("replicates", options.replicates);
    options.base_seed = j.value("base_seed", options.base_seed);
    options.c_tw = j.value("c_tw", options.c_tw);
    options.mean_instability = j.value("mean_instability", options.mean_instability);
    options.instability_trials = j.value("instability_trials", options.instability_trials);
    options.include_eigenvectors = j.value("include_eigenvectors", options.include_eigenvectors);
    options.threads = j.value("threads", options.threads);
    return options;
}

}  // namespace

extern "C" {

const char* ts_version(void) { return "0.1.0"; }

const char* ts_status_name(ts_status status) {
    switch (status) {
        case TS_OK: return "TS_OK";
        case TS_ERR_IO: return "TS_ERR_IO";
        case TS_ERR_MALFORMED_MANIFEST: return "TS_ERR_MALFORMED_MANIFEST";
        case TS_ERR_TENSOR_BOUNDS: return "TS_ERR_TENSOR_BOUNDS";
        case TS_ERR_NON_FINITE: return "TS_ERR_NON_FINITE";
        case TS_ERR_DIMENSION: return "TS_ERR_DIMENSION";
        case TS_ERR_NUMERICAL: return "TS_ERR_NUMERICAL";
        case TS_ERR_FIT: return "TS_ERR_FIT";
        case TS_ERR_DOMAIN: return "TS_ERR_DOMAIN";
        case TS_ERR_NOT_NORMALIZED: return "TS_ERR_NOT_NORMALIZED";
        case TS_ERR_ZERO_TRACE: return "TS_ERR_ZERO_TRACE";
        case TS_ERR_SHAPE_MISMATCH: return "TS_ERR_SHAPE_MISMATCH";
        case TS_ERR_LAYER_NOT_FOUND: return "TS_ERR_LAYER_NOT_FOUND";
        case TS_ERR_DEGENERATE_SVD: return "TS_ERR_DEGENERATE_SVD";
        case TS_ERR_TRAP_NOT_FOUND: return "TS_ERR_TRAP_NOT_FOUND";
        case TS_ERR_DIVERGENCE: return "TS_ERR_DIVERGENCE";
        case TS_ERR_USAGE: return "TS_ERR_USAGE";
        case TS_ERR_INTERNAL: return "TS_ERR_INTERNAL";
    }
    return "TS_ERR_INTERNAL";
}

const char* ts_last_error(void) { return g_last_error.c_str(); }

ts_status ts_checkpoint_open(const char* manifest_path, ts_checkpoint** out) {
    if (ts_status s = require_args(manifest_path && out, "manifest_path and out required"))
        return s;
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<ts_checkpoint>();
        handle->value = trapscan::load_checkpoint(manifest_path);
        *out = handle.release();
    });
}

void ts_checkpoint_close(ts_checkpoint* checkpoint) { delete checkpoint; }

ts_status ts_checkpoint_info_json(const ts_checkpoint* checkpoint, char** out_json) {
    if (ts_status s = require_args(checkpoint && out_json, "checkpoint and out_json required"))
        return s;
    return guarded([&] {
        trapscan::Json j;
        const auto& manifest = checkpoint->value.manifest;
        j["model_name"] = manifest.model_name;
        j["step"] = manifest.step;
        j["data_file"] = manifest.data_file;
        j["layers"] = trapscan::Json::array();
        for (const auto& layer : manifest.layers) {
            trapscan::Json entry;
            entry["layer_id"] = layer.layer_id;
            entry["rows"] = layer.rows;
            entry["cols"] = layer.cols;
            entry["dtype"] = layer.dtype == trapscan::Dtype::F32 ? "f32" : "f64";
            entry["byte_offset"] = layer.byte_offset;
            entry["byte_length"] = layer.byte_length;
            j["layers"].push_back(std::move(entry));
        }
        j["metadata"] = trapscan::Json::object();
        for (const auto& [key, value] : manifest.metadata) j["metadata"][key] = value;
        *out_json = dup_string(j.dump(2));
    });
}

ts_status ts_scan_run(const ts_checkpoint* checkpoint, const char* options_json,
                      ts_report** out) {
    if (ts_status s = require_args(checkpoint && out, "checkpoint and out required")) return s;
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<ts_report>();
        handle->options = scan_options_from_json(parse_options(options_json));
        handle->value = trapscan::scan_checkpoint(checkpoint->value, handle->options);
        *out = handle.release();
    });
}

ts_status ts_report_to_json(const ts_report* report, char** out_json) {
    if (ts_status s = require_args(report && out_json, "report and out_json required"))
        return s;
    return guarded([&] {
        *out_json =
            dup_string(trapscan::scan_report_to_json(report->value, report->options).dump(2));
    });
}

void ts_report_free(ts_report* report) { delete report; }

ts_status ts_ablate_run(const ts_checkpoint* checkpoint, const char* options_json,
                        char** out_json) {
    if (ts_status s = require_args(checkpoint && out_json, "checkpoint and out_json required"))
        return s;
    return guarded([&] {
        const nlohmann::json j = parse_options(options_json);
        trapscan::AblateOptions options;
        if (!j.contains("layer_id"))
            trapscan::raise(ErrorCode::Domain, "ablate options require layer_id");
        options.layer_id = j.at("layer_id").get<std::string>();
        options.trap_index = j.value("trap_index", options.trap_index);
        options.replicates = j.value("replicates", options.replicates);
        options.base_seed = j.value("base_seed", options.base_seed);
        options.c_tw = j.value("c_tw", options.c_tw);
        options.num_probes = j.value("num_probes", options.num_probes);
        options.temperature = j.value("temperature", options.temperature);
        if (j.contains("probe_mean")) options.probe_mean = j.at("probe_mean").get<double>();
        if (j.contains("probe_std")) options.probe_std = j.at("probe_std").get<double>();
        if (j.contains("eval_dataset"))
            options.eval_dataset = j.at("eval_dataset").get<std::string>();
        options.tau_err = j.value("tau_err", options.tau_err);
        options.tau_jsd = j.value("tau_jsd", options.tau_jsd);
        options.seed = j.value("seed", options.seed);

        const auto results = trapscan::ablate_checkpoint(checkpoint->value, options);
        *out_json = dup_string(trapscan::ablation_array_to_json(results, &options).dump(2));
    });
}

ts_status ts_train_run(const char* config_json, const char* output_dir,
                       char** out_summary_json) {
    if (ts_status s = require_args(output_dir && out_summary_json,
                                   "output_dir and out_summary_json required"))
        return s;
    return guarded([&] {
        const nlohmann::json j = parse_options(config_json);
        trapscan::TrainDemoConfig config;
        config.classes = j.value("classes", config.classes);
        config.input_dim = j.value("input_dim", config.input_dim);
        config.train_per_class = j.value("train_per_class", config.train_per_class);
        config.test_per_class = j.value("test_per_class", config.test_per_class);
        config.noise = j.value("noise", config.noise);
        config.separation = j.value("separation", config.separation);
        if (j.contains("hidden"))
            config.hidden = j.at("hidden").get<std::vector<std::int64_t>>();
        config.train.learning_rate = j.value("learning_rate", config.train.learning_rate);
        config.train.weight_decay = j.value("weight_decay", config.train.weight_decay);
        config.train.beta1 = j.value("beta1", config.train.beta1);
        config.train.beta2 = j.value("beta2", config.train.beta2);
        config.train.epsilon = j.value("epsilon", config.train.epsilon);
        config.train.batch_size = j.value("batch_size", config.train.batch_size);
        config.train.steps = j.value("steps", config.train.steps);
        config.train.init_scale = j.value("init_scale", config.train.init_scale);
        config.train.seed = j.value("seed", config.train.seed);
        config.checkpoints = j.value("checkpoints", config.checkpoints);

        const auto result = trapscan::run_train_demo(config, output_dir);
        trapscan::Json summary;
        summary["dataset"] = result.dataset_path;
        summary["log"] = result.log_path;
        summary["checkpoints"] = result.checkpoint_manifests;
        summary["final_train_acc"] = result.final_train_acc;
        summary["final_test_acc"] = result.final_test_acc;
        *out_summary_json = dup_string(summary.dump(2));
    });
}

void ts_string_free(char* s) { delete[] s; }

}  // extern "C"
