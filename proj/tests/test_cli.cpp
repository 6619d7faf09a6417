#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "schema_check.hpp"
#include "trapscan/nn.hpp"
#include "trapscan/tensor_store.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const std::string kCli = TRAPSCAN_CLI_BIN;
const fs::path kSchemaDir = TRAPSCAN_SCHEMA_DIR;

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("trapscan_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args) {
    const std::string command = kCli + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(command.c_str());
    return WEXITSTATUS(raw);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Json load_schema(const std::string& name) {
    return Json::parse(slurp(kSchemaDir / name));
}

// Clean init checkpoint at `step`, optionally with an injected trap.
std::string write_checkpoint(const fs::path& dir, std::int64_t step, bool spiked,
                             std::uint64_t seed) {
    using namespace trapscan;
    MlpModel model = make_mlp({40, 50, 12}, 1.0, seed);
    if (spiked) {
        double max_abs = 0.0;
        for (double x : model.layers[0].weight.data) max_abs = std::max(max_abs, std::abs(x));
        model = inject_trap(model, 0, 60.0 * max_abs, 10, seed + 1);
    }
    const std::string stem = (dir / ("ckpt_" + std::to_string(step))).string();
    save_checkpoint(model_to_layers(model),
                    {{"train_acc", "0.9"}, {"test_acc", "0.8"}},
                    stem, "cli-test", step);
    return stem + ".json";
}

}  // namespace

TEST_CASE("no arguments is a usage error (exit 64)") {
    CHECK(run("") == 64);
    CHECK(run("scan") == 64);  // missing checkpoint list
    CHECK(run("definitely-not-a-command") == 64);
}

TEST_CASE("scan writes a schema-valid report and exits 0") {
    const auto dir = temp_dir("scan");
    const std::string manifest = write_checkpoint(dir, 0, true, 3);
    const std::string out = (dir / "report.json").string();
    CHECK(run("scan " + manifest + " --replicates 3 --seed 9 --out " + out) == 0);

    const Json report = Json::parse(slurp(out));
    const auto violations = schema_check::check(report, load_schema("scan_report.schema.json"));
    for (const auto& violation : violations) MESSAGE(violation);
    CHECK(violations.empty());

    // Traps in the injected layer only; the clean layer reports zero.
    for (const auto& layer : report.at("layers")) {
        if (layer.at("layer_id") == "fc1.weight")
            CHECK(!layer.at("traps").empty());
        else
            CHECK(layer.at("traps").empty());
    }

    // CSV summary format.
    const std::string csv_out = (dir / "report.csv").string();
    CHECK(run("scan " + manifest + " --replicates 3 --seed 9 --format csv --out " +
              csv_out) == 0);
    const std::string csv = slurp(csv_out);
    CHECK(csv.rfind("step,layer,mean_traps,std_traps,lambda_plus,max_lambda", 0) == 0);
    CHECK(csv.find("fc1.weight") != std::string::npos);
}

TEST_CASE("scan reports are byte-identical across runs and thread counts") {
    const auto dir = temp_dir("det");
    const std::string manifest = write_checkpoint(dir, 0, true, 5);
    const std::string out1 = (dir / "r1.json").string();
    const std::string out2 = (dir / "r2.json").string();
    const std::string out3 = (dir / "r3.json").string();
    CHECK(run("scan " + manifest + " --replicates 3 --out " + out1) == 0);
    CHECK(run("scan " + manifest + " --replicates 3 --out " + out2) == 0);
    CHECK(run("scan " + manifest + " --replicates 3 --threads 4 --out " + out3) == 0);
    CHECK(slurp(out1) == slurp(out2));
    // Thread count is echoed as provenance but must not change any result.
    Json a = Json::parse(slurp(out1));
    Json b = Json::parse(slurp(out3));
    a.at("options").erase("threads");
    b.at("options").erase("threads");
    CHECK(a == b);
}

TEST_CASE("scan --mean-instability embeds instability reports") {
    const auto dir = temp_dir("mi");
    // Constant-shifted layer: the trap aligns with the constant direction.
    using namespace trapscan;
    MlpModel model = make_mlp({40, 50, 12}, 1.0, 8);
    for (double& x : model.layers[0].weight.data) x += 1.0;
    const std::string stem = (dir / "ckpt").string();
    save_checkpoint(model_to_layers(model), {}, stem, "mi-test", 0);

    const std::string out = (dir / "report.json").string();
    CHECK(run("scan " + stem + ".json --replicates 2 --mean-instability --out " + out) == 0);
    const Json report = Json::parse(slurp(out));
    bool any_instability = false;
    for (const auto& layer : report.at("layers")) {
        if (!layer.contains("mean_instability")) continue;
        for (const auto& inst : layer.at("mean_instability")) {
            any_instability = true;
            CHECK(inst.at("row_mean_variance").get<double>() >=
                  inst.at("bound").get<double>() - 1e-9);
        }
    }
    CHECK(any_instability);

    // The flag is also accepted under its alternate name.
    CHECK(run("scan " + stem + ".json --replicates 2 --theorem2 --out " + out) == 0);
}

TEST_CASE("scan on a missing checkpoint exits 2 and still writes failures") {
    const auto dir = temp_dir("missing");
    const std::string out = (dir / "report.json").string();
    CHECK(run("scan /no/such/ckpt.json --out " + out) == 2);
    const Json report = Json::parse(slurp(out));
    CHECK(report.at("reports").empty());
    CHECK(report.at("failures").size() == 1);
}

TEST_CASE("series emits sorted per-step rows with accuracy columns") {
    const auto dir = temp_dir("series");
    // Deliberately passed out of order; output must sort by step.
    const std::string late = write_checkpoint(dir, 200, true, 11);
    const std::string early = write_checkpoint(dir, 0, false, 12);
    const std::string mid = write_checkpoint(dir, 100, false, 13);
    const std::string out = (dir / "series.csv").string();
    CHECK(run("series " + late + " " + early + " " + mid + " --replicates 3 --out " + out) ==
          0);

    std::istringstream csv(slurp(out));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "step,layer,mean_traps,std_traps,train_acc,test_acc");
    std::vector<std::int64_t> steps;
    std::vector<double> fc1_means;
    while (std::getline(csv, line)) {
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        steps.push_back(std::stoll(field));
        std::getline(row, field, ',');
        const bool fc1 = field == "fc1.weight";
        std::getline(row, field, ',');
        if (fc1) fc1_means.push_back(std::stod(field));
        std::getline(row, field, ',');
        std::getline(row, field, ',');
        CHECK(field == "0.9");
    }
    CHECK(std::is_sorted(steps.begin(), steps.end()));
    REQUIRE(fc1_means.size() == 3);
    CHECK(fc1_means[0] == 0.0);   // step 0, clean
    CHECK(fc1_means[1] == 0.0);   // step 100, clean
    CHECK(fc1_means[2] >= 1.0);   // step 200, injected
}

TEST_CASE("series with a single checkpoint is a usage error") {
    const auto dir = temp_dir("series1");
    const std::string only = write_checkpoint(dir, 0, false, 14);
    CHECK(run("series " + only) == 64);
}

TEST_CASE("ablate writes schema-valid JSON and CSV; bad selector exits 4") {
    const auto dir = temp_dir("ablate");
    const std::string manifest = write_checkpoint(dir, 0, true, 15);
    const std::string prefix = (dir / "ablation").string();
    CHECK(run("ablate " + manifest +
              " --layer fc1.weight --trap 0 --replicates 2 --probes 64 --out " + prefix) == 0);

    const Json result = Json::parse(slurp(prefix + ".json"));
    const auto violations =
        schema_check::check(result, load_schema("ablation_result.schema.json"));
    for (const auto& violation : violations) MESSAGE(violation);
    CHECK(violations.empty());

    const std::string csv = slurp(prefix + ".csv");
    CHECK(csv.rfind("trap_id,layer,lambda,ipr,jsd,delta_err,class", 0) == 0);

    CHECK(run("ablate " + manifest + " --layer fc1.weight --trap 99 --replicates 2") == 4);
}

TEST_CASE("train-demo then report round trip") {
    const auto dir = temp_dir("traindemo");
    const std::string config_path = (dir / "config.json").string();
    {
        std::ofstream config(config_path);
        config << R"({"classes":12,"input_dim":12,"train_per_class":6,"test_per_class":6,
                      "hidden":[16],"steps":30,"batch_size":24,"checkpoints":3,
                      "init_scale":1.0,"learning_rate":0.005,"seed":4})";
    }
    const std::string out_dir = (dir / "run").string();
    CHECK(run("train-demo " + config_path + " --out " + out_dir) == 0);
    CHECK(fs::exists(fs::path(out_dir) / "train_log.csv"));
    CHECK(fs::exists(fs::path(out_dir) / "dataset.json"));
    CHECK(fs::exists(fs::path(out_dir) / "ckpt_00000000.json"));
    CHECK(fs::exists(fs::path(out_dir) / "ckpt_00000030.json"));

    // Determinism: identical CSVs on a rerun.
    const std::string out_dir2 = (dir / "run2").string();
    CHECK(run("train-demo " + config_path + " --out " + out_dir2) == 0);
    CHECK(slurp(fs::path(out_dir) / "train_log.csv") ==
          slurp(fs::path(out_dir2) / "train_log.csv"));

    // Scan one of its checkpoints, then render markdown.
    const std::string report_path = (dir / "report.json").string();
    CHECK(run("scan " + (fs::path(out_dir) / "ckpt_00000030.json").string() +
              " --replicates 2 --out " + report_path) == 0);
    const std::string md_path = (dir / "report.md").string();
    CHECK(run("report " + report_path + " --out " + md_path) == 0);
    const std::string md = slurp(md_path);
    CHECK(md.find("# trapscan report") != std::string::npos);
    CHECK(md.find("fc1.weight") != std::string::npos);
}

TEST_CASE("steps=0 writes only the init checkpoint") {
    const auto dir = temp_dir("steps0");
    const std::string config_path = (dir / "config.json").string();
    {
        std::ofstream config(config_path);
        config << R"({"classes":2,"input_dim":4,"train_per_class":4,"test_per_class":4,
                      "hidden":[4],"steps":0,"init_scale":1.0})";
    }
    const std::string out_dir = (dir / "run").string();
    CHECK(run("train-demo " + config_path + " --out " + out_dir) == 0);
    CHECK(fs::exists(fs::path(out_dir) / "ckpt_00000000.json"));
    std::size_t manifests = 0;
    for (const auto& entry : fs::directory_iterator(out_dir))
        if (entry.path().extension() == ".json" &&
            entry.path().filename().string().rfind("ckpt_", 0) == 0)
            ++manifests;
    CHECK(manifests == 1);
}

TEST_CASE("TRAPSCAN_THREADS caps the worker pool without changing results") {
    const auto dir = temp_dir("threads");
    const std::string manifest = write_checkpoint(dir, 0, true, 16);
    const std::string out1 = (dir / "a.json").string();
    const std::string out2 = (dir / "b.json").string();
    CHECK(run("scan " + manifest + " --replicates 2 --out " + out1) == 0);
    const std::string command = "TRAPSCAN_THREADS=1 " + kCli + " scan " + manifest +
                                " --replicates 2 --out " + out2 + " >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(command.c_str())) == 0);
    Json a = Json::parse(slurp(out1));
    Json b = Json::parse(slurp(out2));
    a.at("options").erase("threads");
    b.at("options").erase("threads");
    CHECK(a == b);
}
