// trapscan command-line front end. All analysis goes through the shared
// library's C API; this file only parses flags, assembles option JSON, and
// renders results.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trapscan.h"

namespace {

using Json = nlohmann::ordered_json;

// sysexits-style codes, plus the documented specific ones.
constexpr int kExitOk = 0;
constexpr int kExitIngestion = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitTrapNotFound = 4;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitInternal = 70;

int status_to_exit(ts_status status) {
    switch (status) {
        case TS_OK: return kExitOk;
        case TS_ERR_IO:
        case TS_ERR_MALFORMED_MANIFEST:
        case TS_ERR_TENSOR_BOUNDS:
        case TS_ERR_NON_FINITE: return kExitIngestion;
        case TS_ERR_NUMERICAL:
        case TS_ERR_FIT:
        case TS_ERR_DIMENSION:
        case TS_ERR_ZERO_TRACE:
        case TS_ERR_DEGENERATE_SVD:
        case TS_ERR_DIVERGENCE: return kExitNumerical;
        case TS_ERR_TRAP_NOT_FOUND: return kExitTrapNotFound;
        case TS_ERR_USAGE: return kExitUsage;
        case TS_ERR_DOMAIN:
        case TS_ERR_SHAPE_MISMATCH:
        case TS_ERR_NOT_NORMALIZED:
        case TS_ERR_LAYER_NOT_FOUND: return kExitData;
        default: return kExitInternal;
    }
}

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { ts_string_free(ptr); }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

struct CheckpointHandle {
    ts_checkpoint* ptr = nullptr;
    ~CheckpointHandle() { ts_checkpoint_close(ptr); }
};

struct ReportHandle {
    ts_report* ptr = nullptr;
    ~ReportHandle() { ts_report_free(ptr); }
};

struct ScanFlags {
    std::int64_t replicates = 5;
    std::uint64_t seed = 0;
    double c_tw = 4.0;
    bool mean_instability = false;
    bool include_eigenvectors = false;
    int threads = -1;  // -1 = not set on the command line
};

void add_scan_flags(CLI::App* cmd, ScanFlags& flags) {
    cmd->add_option("--replicates", flags.replicates, "Shuffle replicates per layer")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--seed", flags.seed, "Base seed for all derived randomness")
        ->capture_default_str();
    cmd->add_option("--c-tw", flags.c_tw, "Edge-fluctuation threshold multiplier")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_flag("--mean-instability,--theorem2", flags.mean_instability,
                  "Attach row-mean instability reports to detected traps");
    cmd->add_flag("--include-eigenvectors", flags.include_eigenvectors,
                  "Embed trap eigenvectors in the JSON report");
    cmd->add_option("--threads", flags.threads,
                    "Worker threads (0 = machine default; TRAPSCAN_THREADS caps this)");
}

int effective_threads(int flag_value) {
    const char* env = std::getenv("TRAPSCAN_THREADS");
    std::optional<int> cap;
    if (env && *env) {
        try {
            cap = std::stoi(env);
        } catch (...) {
            cap = std::nullopt;
        }
        if (cap && *cap < 0) cap = std::nullopt;
    }
    int threads = flag_value >= 0 ? flag_value : cap.value_or(0);
    if (cap && *cap > 0) threads = threads == 0 ? *cap : std::min(threads, *cap);
    return threads;
}

std::string scan_options_json(const ScanFlags& flags) {
    Json j;
    j["replicates"] = flags.replicates;
    j["base_seed"] = flags.seed;
    j["c_tw"] = flags.c_tw;
    j["mean_instability"] = flags.mean_instability;
    j["include_eigenvectors"] = flags.include_eigenvectors;
    j["threads"] = effective_threads(flags.threads);
    return j.dump();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << contents;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string format_count(double mean, double std) {
    if (!std::isfinite(mean)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f +/- %.2f", mean, std);
    return buf;
}

double layer_mean_lambda_plus(const Json& layer) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& fit : layer.at("mp_fits")) {
        acc += fit.at("lambda_plus").get<double>();
        ++n;
    }
    return n ? acc / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double layer_max_lambda(const Json& layer) {
    double peak = std::numeric_limits<double>::quiet_NaN();
    for (const auto& fit : layer.at("mp_fits")) {
        const double value = fit.at("max_eigenvalue").get<double>();
        if (!std::isfinite(peak) || value > peak) peak = value;
    }
    return peak;
}

std::string layer_top_mass(const Json& layer) {
    // Headline localization number: mass on the top 5% of coordinates,
    // maximized over the layer's detected traps.
    const std::int64_t short_side =
        std::min(layer.at("rows").get<std::int64_t>(), layer.at("cols").get<std::int64_t>());
    const std::int64_t k = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil(0.05 * static_cast<double>(short_side))));
    double best = -1.0;
    for (const auto& trap : layer.at("traps")) {
        const auto& masses = trap.at("top_k_mass");
        const std::string key = std::to_string(k);
        if (masses.contains(key)) best = std::max(best, masses.at(key).get<double>());
    }
    if (best < 0.0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", best);
    return buf;
}

void print_scan_summary(const Json& report, const std::string& path) {
    std::cout << "checkpoint: " << report.at("model_name").get<std::string>() << " step "
              << report.at("step").get<std::int64_t>() << "  (" << path << ")\n";
    std::printf("  %-24s %-18s %-12s %-12s %s\n", "layer", "traps (mean+/-std)",
                "lambda_plus", "max lambda", "top-5% mass");
    for (const auto& layer : report.at("layers")) {
        const double mean = layer.at("mean_count").is_null()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : layer.at("mean_count").get<double>();
        const double stddev = layer.at("std_count").is_null()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : layer.at("std_count").get<double>();
        std::printf("  %-24s %-18s %-12.4g %-12.4g %s\n",
                    layer.at("layer_id").get<std::string>().c_str(),
                    format_count(mean, stddev).c_str(), layer_mean_lambda_plus(layer),
                    layer_max_lambda(layer), layer_top_mass(layer).c_str());
    }
    for (const auto& skipped : report.at("skipped"))
        std::cout << "  " << skipped.at("layer_id").get<std::string>() << ": skipped ("
                  << skipped.at("reason").get<std::string>() << ")\n";
}

std::string scan_csv(const std::vector<Json>& reports) {
    std::ostringstream out;
    out << "step,layer,mean_traps,std_traps,lambda_plus,max_lambda\n";
    for (const auto& report : reports) {
        for (const auto& layer : report.at("layers")) {
            out << report.at("step").get<std::int64_t>() << ","
                << layer.at("layer_id").get<std::string>() << ",";
            if (!layer.at("mean_count").is_null()) out << layer.at("mean_count").get<double>();
            out << ",";
            if (!layer.at("std_count").is_null()) out << layer.at("std_count").get<double>();
            out << "," << layer_mean_lambda_plus(layer) << "," << layer_max_lambda(layer)
                << "\n";
        }
    }
    return out.str();
}

struct ScanOutcome {
    std::vector<Json> reports;
    Json failures = Json::array();
    int exit_code = kExitOk;
};

ScanOutcome run_scans(const std::vector<std::string>& paths, const ScanFlags& flags,
                      bool print_summary) {
    ScanOutcome outcome;
    const std::string options = scan_options_json(flags);
    for (const auto& path : paths) {
        CheckpointHandle checkpoint;
        ts_status status = ts_checkpoint_open(path.c_str(), &checkpoint.ptr);
        if (status != TS_OK) {
            Json failure;
            failure["checkpoint"] = path;
            failure["stage"] = "ingestion";
            failure["status"] = ts_status_name(status);
            failure["error"] = ts_last_error();
            outcome.failures.push_back(std::move(failure));
            outcome.exit_code = kExitIngestion;
            std::cerr << "error: " << path << ": " << ts_last_error() << "\n";
            continue;
        }
        ReportHandle report;
        status = ts_scan_run(checkpoint.ptr, options.c_str(), &report.ptr);
        if (status != TS_OK) {
            Json failure;
            failure["checkpoint"] = path;
            failure["stage"] = "scan";
            failure["status"] = ts_status_name(status);
            failure["error"] = ts_last_error();
            outcome.failures.push_back(std::move(failure));
            if (outcome.exit_code == kExitOk) outcome.exit_code = kExitNumerical;
            std::cerr << "error: " << path << ": " << ts_last_error() << "\n";
            continue;
        }
        OwnedString json;
        status = ts_report_to_json(report.ptr, &json.ptr);
        if (status != TS_OK) {
            if (outcome.exit_code == kExitOk) outcome.exit_code = kExitInternal;
            continue;
        }
        Json parsed = Json::parse(json.str());
        parsed["source"] = path;
        if (print_summary) print_scan_summary(parsed, path);

        // A layer whose replicates all failed is a numerical failure even
        // though the report itself was produced.
        for (const auto& layer : parsed.at("layers")) {
            if (layer.at("valid_replicates").get<std::int64_t>() == 0 &&
                outcome.exit_code == kExitOk)
                outcome.exit_code = kExitNumerical;
        }
        outcome.reports.push_back(std::move(parsed));
    }
    return outcome;
}

std::string report_document(const ScanOutcome& outcome) {
    if (outcome.reports.size() == 1 && outcome.failures.empty())
        return outcome.reports[0].dump(2) + "\n";
    Json doc;
    doc["schema"] = "trapscan/scan-report-set/v1";
    doc["reports"] = outcome.reports;
    doc["failures"] = outcome.failures;
    return doc.dump(2) + "\n";
}

int cmd_scan(const std::vector<std::string>& paths, const ScanFlags& flags,
             const std::string& out_path, const std::string& format) {
    // Keep stdout machine-readable when CSV goes to the terminal.
    const bool print_summary = !(format == "csv" && out_path.empty());
    ScanOutcome outcome = run_scans(paths, flags, print_summary);
    const std::string payload =
        format == "csv" ? scan_csv(outcome.reports) : report_document(outcome);
    if (!out_path.empty()) {
        write_file(out_path, payload);
        std::cout << "report written to " << out_path << "\n";
    } else if (format == "csv") {
        std::cout << payload;
    }
    return outcome.exit_code;
}

int cmd_series(const std::vector<std::string>& paths, const ScanFlags& flags,
               const std::string& out_path) {
    if (paths.size() < 2) {
        std::cerr << "error: series needs at least 2 checkpoints\n";
        return kExitUsage;
    }
    ScanOutcome outcome = run_scans(paths, flags, false);
    if (outcome.reports.size() < 2) {
        std::cerr << "error: series needs at least 2 scannable checkpoints\n";
        return outcome.exit_code == kExitOk ? kExitUsage : outcome.exit_code;
    }
    std::sort(outcome.reports.begin(), outcome.reports.end(),
              [](const Json& a, const Json& b) {
                  return a.at("step").get<std::int64_t>() < b.at("step").get<std::int64_t>();
              });

    std::ostringstream csv;
    csv << "step,layer,mean_traps,std_traps,train_acc,test_acc\n";
    for (const auto& report : outcome.reports) {
        const auto& metadata = report.at("metadata");
        const auto metadata_or_blank = [&](const char* key) -> std::string {
            if (metadata.contains(key)) return metadata.at(key).get<std::string>();
            return "";
        };
        for (const auto& layer : report.at("layers")) {
            csv << report.at("step").get<std::int64_t>() << ","
                << layer.at("layer_id").get<std::string>() << ",";
            if (!layer.at("mean_count").is_null()) csv << layer.at("mean_count").get<double>();
            csv << ",";
            if (!layer.at("std_count").is_null()) csv << layer.at("std_count").get<double>();
            csv << "," << metadata_or_blank("train_acc") << "," << metadata_or_blank("test_acc")
                << "\n";
        }
    }
    if (out_path.empty())
        std::cout << csv.str();
    else {
        write_file(out_path, csv.str());
        std::cout << "series written to " << out_path << "\n";
    }
    return outcome.exit_code;
}

int cmd_ablate(const std::string& path, const Json& options, const std::string& out_prefix) {
    CheckpointHandle checkpoint;
    ts_status status = ts_checkpoint_open(path.c_str(), &checkpoint.ptr);
    if (status != TS_OK) {
        std::cerr << "error: " << ts_last_error() << "\n";
        return status_to_exit(status);
    }
    OwnedString json;
    status = ts_ablate_run(checkpoint.ptr, options.dump().c_str(), &json.ptr);
    if (status != TS_OK) {
        std::cerr << "error: " << ts_last_error() << "\n";
        return status_to_exit(status);
    }
    const Json parsed = Json::parse(json.str());

    std::ostringstream csv;
    csv << "trap_id,layer,lambda,ipr,jsd,delta_err,class\n";
    for (const auto& result : parsed.at("results")) {
        csv << result.at("trap_index").get<std::int64_t>() << ","
            << result.at("layer_id").get<std::string>() << ","
            << result.at("lambda").get<double>() << "," << result.at("ipr").get<double>()
            << "," << result.at("jsd").get<double>() << ",";
        if (!result.at("delta_test_error").is_null())
            csv << result.at("delta_test_error").get<double>();
        csv << "," << result.at("classification").get<std::string>() << "\n";
        std::cout << "trap " << result.at("trap_index").get<std::int64_t>() << " lambda="
                  << result.at("lambda").get<double>() << " jsd=" << result.at("jsd").get<double>()
                  << " class=" << result.at("classification").get<std::string>() << "\n";
    }
    if (!out_prefix.empty()) {
        write_file(out_prefix + ".json", json.str() + "\n");
        write_file(out_prefix + ".csv", csv.str());
        std::cout << "results written to " << out_prefix << ".{json,csv}\n";
    }
    return kExitOk;
}

int cmd_train_demo(const std::string& config_path, const std::string& out_dir) {
    std::string config = "{}";
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config '" << config_path << "'\n";
            return kExitData;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        config = buf.str();
    }
    OwnedString summary;
    const ts_status status = ts_train_run(config.c_str(), out_dir.c_str(), &summary.ptr);
    if (status != TS_OK) {
        std::cerr << "error: " << ts_last_error() << "\n";
        return status_to_exit(status);
    }
    std::cout << summary.str() << "\n";
    return kExitOk;
}

void render_layer_markdown(std::ostringstream& md, const Json& report) {
    md << "## " << report.at("model_name").get<std::string>() << " @ step "
       << report.at("step").get<std::int64_t>() << "\n\n";
    md << "| layer | traps (mean +/- std) | lambda_plus | max lambda | top-5% mass |\n";
    md << "|---|---|---|---|---|\n";
    for (const auto& layer : report.at("layers")) {
        const double mean = layer.at("mean_count").is_null()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : layer.at("mean_count").get<double>();
        const double stddev = layer.at("std_count").is_null()
                                  ? std::numeric_limits<double>::quiet_NaN()
                                  : layer.at("std_count").get<double>();
        md << "| " << layer.at("layer_id").get<std::string>() << " | "
           << format_count(mean, stddev) << " | " << layer_mean_lambda_plus(layer) << " | "
           << layer_max_lambda(layer) << " | " << layer_top_mass(layer) << " |\n";
    }
    md << "\n";
    if (report.contains("skipped") && !report.at("skipped").empty()) {
        for (const auto& skipped : report.at("skipped"))
            md << "- skipped " << skipped.at("layer_id").get<std::string>() << " ("
               << skipped.at("reason").get<std::string>() << ")\n";
        md << "\n";
    }
    std::size_t trap_total = 0;
    for (const auto& layer : report.at("layers")) trap_total += layer.at("traps").size();
    md << "Detected traps: " << trap_total << "\n\n";
}

int cmd_report(const std::string& in_path, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) {
        std::cerr << "error: cannot open '" << in_path << "'\n";
        return kExitData;
    }
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const std::exception& e) {
        std::cerr << "error: invalid report JSON: " << e.what() << "\n";
        return kExitData;
    }
    std::ostringstream md;
    md << "# trapscan report\n\n";
    try {
        if (doc.contains("reports")) {
            for (const auto& report : doc.at("reports")) render_layer_markdown(md, report);
            if (doc.contains("failures") && !doc.at("failures").empty()) {
                md << "## Failures\n\n";
                for (const auto& failure : doc.at("failures"))
                    md << "- " << failure.at("checkpoint").get<std::string>() << ": "
                       << failure.at("error").get<std::string>() << "\n";
            }
        } else {
            render_layer_markdown(md, doc);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: report JSON missing fields: " << e.what() << "\n";
        return kExitData;
    }
    if (out_path.empty())
        std::cout << md.str();
    else {
        write_file(out_path, md.str());
        std::cout << "markdown written to " << out_path << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trapscan: weight-only overfitting diagnostics from shuffled layer spectra"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ts_version()));

    // scan
    auto* scan = app.add_subcommand("scan", "Scan checkpoints for shuffled-spectrum outliers");
    std::vector<std::string> scan_paths;
    ScanFlags scan_flags;
    std::string scan_out, scan_format = "json";
    scan->add_option("checkpoints", scan_paths, "Checkpoint manifest paths")->required();
    add_scan_flags(scan, scan_flags);
    scan->add_option("--out,-o", scan_out, "Report output path");
    scan->add_option("--format", scan_format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();

    // series
    auto* series = app.add_subcommand("series", "Per-step trap counts across a checkpoint series");
    std::vector<std::string> series_paths;
    ScanFlags series_flags;
    std::string series_out;
    series->add_option("checkpoints", series_paths, "Checkpoint manifest paths (>= 2)")
        ->required();
    add_scan_flags(series, series_flags);
    series->add_option("--out,-o", series_out, "CSV output path");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Remove a detected trap and score the change");
    std::string ablate_path, ablate_layer, ablate_out, ablate_eval;
    std::int64_t ablate_trap = 0, ablate_probes = 1024, ablate_replicates = 5;
    std::uint64_t ablate_seed = 0;
    double ablate_temperature = 1.0, ablate_c_tw = 4.0, ablate_tau_err = 0.01;
    std::optional<double> ablate_mean, ablate_std;
    bool ablate_all = false;
    ablate->add_option("checkpoint", ablate_path, "Checkpoint manifest path")->required();
    ablate->add_option("--layer", ablate_layer, "Layer id (e.g. fc1.weight)")->required();
    ablate->add_option("--trap", ablate_trap, "Trap index from a fresh scan")
        ->capture_default_str();
    ablate->add_flag("--all", ablate_all, "Ablate every detected trap");
    ablate->add_option("--replicates", ablate_replicates, "Shuffle replicates for the scan")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ablate->add_option("--seed", ablate_seed, "Base seed")->capture_default_str();
    ablate->add_option("--c-tw", ablate_c_tw, "Edge-fluctuation threshold multiplier")
        ->capture_default_str();
    ablate->add_option("--probes", ablate_probes, "Number of Gaussian probe inputs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ablate->add_option("--temperature", ablate_temperature, "Softmax temperature")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ablate->add_option("--probe-mean", ablate_mean, "Probe mean (default: checkpoint metadata)");
    ablate->add_option("--probe-std", ablate_std, "Probe std (default: checkpoint metadata)");
    ablate->add_option("--eval-data", ablate_eval, "Dataset JSON for the test-error delta");
    ablate->add_option("--tau-err", ablate_tau_err, "Harmful/benign error threshold")
        ->capture_default_str();
    ablate->add_option("--out,-o", ablate_out, "Output prefix for .json/.csv");

    // train-demo
    auto* train = app.add_subcommand("train-demo", "Train the synthetic-task demo model");
    std::string train_config, train_out = "train-demo-out";
    train->add_option("config", train_config, "Config JSON path (defaults when omitted)");
    train->add_option("--out,-o", train_out, "Output directory")->capture_default_str();

    // report
    auto* report = app.add_subcommand("report", "Render a scan report JSON as markdown");
    std::string report_in, report_out;
    report->add_option("input", report_in, "Scan report JSON path")->required();
    report->add_option("--out,-o", report_out, "Markdown output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (scan->parsed()) return cmd_scan(scan_paths, scan_flags, scan_out, scan_format);
        if (series->parsed()) return cmd_series(series_paths, series_flags, series_out);
        if (ablate->parsed()) {
            Json options;
            options["layer_id"] = ablate_layer;
            options["trap_index"] = ablate_all ? -1 : ablate_trap;
            options["replicates"] = ablate_replicates;
            options["base_seed"] = ablate_seed;
            options["c_tw"] = ablate_c_tw;
            options["num_probes"] = ablate_probes;
            options["temperature"] = ablate_temperature;
            if (ablate_mean) options["probe_mean"] = *ablate_mean;
            if (ablate_std) options["probe_std"] = *ablate_std;
            if (!ablate_eval.empty()) options["eval_dataset"] = ablate_eval;
            options["tau_err"] = ablate_tau_err;
            options["seed"] = ablate_seed;
            return cmd_ablate(ablate_path, options, ablate_out);
        }
        if (train->parsed()) return cmd_train_demo(train_config, train_out);
        if (report->parsed()) return cmd_report(report_in, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
