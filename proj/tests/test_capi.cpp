#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "trapscan.h"
#include "trapscan/nn.hpp"
#include "trapscan/tensor_store.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("trapscan_capi_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string make_checkpoint(const fs::path& dir, bool with_spike) {
    using namespace trapscan;
    MlpModel model = make_mlp({30, 40, 12}, 1.0, 7);
    if (with_spike) {
        double max_abs = 0.0;
        for (double x : model.layers[0].weight.data) max_abs = std::max(max_abs, std::abs(x));
        model = inject_trap(model, 0, 60.0 * max_abs, 8, 3);
    }
    const std::string stem = (dir / "ckpt").string();
    save_checkpoint(model_to_layers(model),
                    {{"train_acc", "1.0"}, {"input_mean", "0.0"}, {"input_std", "1.0"}},
                    stem, "capi-test", 5);
    return stem + ".json";
}

}  // namespace

TEST_CASE("status name table covers ok and errors") {
    CHECK(std::string(ts_status_name(TS_OK)) == "TS_OK");
    CHECK(std::string(ts_status_name(TS_ERR_FIT)) == "TS_ERR_FIT");
    CHECK(std::string(ts_version()).find('.') != std::string::npos);
}

TEST_CASE("opening a missing checkpoint reports an IO error with a message") {
    ts_checkpoint* handle = nullptr;
    const ts_status status = ts_checkpoint_open("/no/such/manifest.json", &handle);
    CHECK(status == TS_ERR_IO);
    CHECK(handle == nullptr);
    CHECK(std::string(ts_last_error()).find("manifest") != std::string::npos);
}

TEST_CASE("null arguments are usage errors") {
    CHECK(ts_checkpoint_open(nullptr, nullptr) == TS_ERR_USAGE);
    CHECK(ts_scan_run(nullptr, "{}", nullptr) == TS_ERR_USAGE);
}

TEST_CASE("scan through the C surface produces a parseable report") {
    const auto dir = temp_dir("scan");
    const std::string manifest = make_checkpoint(dir, true);

    ts_checkpoint* checkpoint = nullptr;
    REQUIRE(ts_checkpoint_open(manifest.c_str(), &checkpoint) == TS_OK);

    char* info = nullptr;
    REQUIRE(ts_checkpoint_info_json(checkpoint, &info) == TS_OK);
    const Json parsed_info = Json::parse(info);
    CHECK(parsed_info.at("model_name") == "capi-test");
    CHECK(parsed_info.at("layers").size() == 4);  // 2 weights + 2 biases
    ts_string_free(info);

    ts_report* report = nullptr;
    REQUIRE(ts_scan_run(checkpoint, R"({"replicates":3,"base_seed":11})", &report) == TS_OK);
    char* json = nullptr;
    REQUIRE(ts_report_to_json(report, &json) == TS_OK);
    const Json parsed = Json::parse(json);
    CHECK(parsed.at("schema") == "trapscan/scan-report/v1");
    CHECK(parsed.at("step") == 5);
    CHECK(parsed.at("layers").size() == 2);       // weights analyzed
    CHECK(parsed.at("skipped").size() == 2);      // biases skipped
    // The injected layer reports traps.
    bool any_traps = false;
    for (const auto& layer : parsed.at("layers"))
        if (!layer.at("traps").empty()) any_traps = true;
    CHECK(any_traps);
    ts_string_free(json);
    ts_report_free(report);
    ts_checkpoint_close(checkpoint);
}

TEST_CASE("invalid scan options are domain errors") {
    const auto dir = temp_dir("badopts");
    const std::string manifest = make_checkpoint(dir, false);
    ts_checkpoint* checkpoint = nullptr;
    REQUIRE(ts_checkpoint_open(manifest.c_str(), &checkpoint) == TS_OK);
    ts_report* report = nullptr;
    CHECK(ts_scan_run(checkpoint, "{not json", &report) == TS_ERR_DOMAIN);
    ts_checkpoint_close(checkpoint);
}

TEST_CASE("ablate through the C surface") {
    const auto dir = temp_dir("ablate");
    const std::string manifest = make_checkpoint(dir, true);
    ts_checkpoint* checkpoint = nullptr;
    REQUIRE(ts_checkpoint_open(manifest.c_str(), &checkpoint) == TS_OK);

    char* json = nullptr;
    const std::string options =
        R"({"layer_id":"fc1.weight","trap_index":0,"replicates":2,"num_probes":64,"seed":5})";
    REQUIRE(ts_ablate_run(checkpoint, options.c_str(), &json) == TS_OK);
    const Json parsed = Json::parse(json);
    CHECK(parsed.at("schema") == "trapscan/ablation-result/v1");
    REQUIRE(parsed.at("results").size() == 1);
    const auto& result = parsed.at("results")[0];
    CHECK(result.at("jsd").get<double>() >= 0.0);
    CHECK(result.at("classification") == "Unlabeled");  // no eval dataset
    CHECK(result.at("delta_test_error").is_null());
    ts_string_free(json);

    // Selector out of range.
    char* json2 = nullptr;
    const std::string bad =
        R"({"layer_id":"fc1.weight","trap_index":999,"replicates":2})";
    CHECK(ts_ablate_run(checkpoint, bad.c_str(), &json2) == TS_ERR_TRAP_NOT_FOUND);

    // Clean layer: no trap to ablate.
    char* json3 = nullptr;
    const std::string clean =
        R"({"layer_id":"fc2.weight","trap_index":0,"replicates":2})";
    CHECK(ts_ablate_run(checkpoint, clean.c_str(), &json3) == TS_ERR_TRAP_NOT_FOUND);
    ts_checkpoint_close(checkpoint);
}

TEST_CASE("train through the C surface writes checkpoints and a log") {
    const auto dir = temp_dir("train");
    char* summary = nullptr;
    const std::string config =
        R"({"classes":2,"input_dim":6,"train_per_class":8,"test_per_class":8,
            "hidden":[8],"steps":20,"batch_size":8,"checkpoints":3,
            "init_scale":1.0,"learning_rate":0.005,"seed":4})";
    REQUIRE(ts_train_run(config.c_str(), dir.string().c_str(), &summary) == TS_OK);
    const Json parsed = Json::parse(summary);
    CHECK(fs::exists(parsed.at("dataset").get<std::string>()));
    CHECK(fs::exists(parsed.at("log").get<std::string>()));
    for (const auto& path : parsed.at("checkpoints"))
        CHECK(fs::exists(path.get<std::string>()));
    CHECK(parsed.at("checkpoints").size() >= 2);
    ts_string_free(summary);
}
