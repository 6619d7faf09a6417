#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "trapscan/ablation.hpp"
#include "trapscan/report_json.hpp"

using namespace trapscan;

namespace {

// Single-layer linear model around a given weight matrix.
MlpModel linear_model(const WeightMatrix& w) {
    MlpModel model;
    MlpLayer layer;
    layer.weight = w;
    layer.bias.assign(static_cast<std::size_t>(w.rows), 0.0);
    model.layers.push_back(std::move(layer));
    model.input_dim = w.cols;
    model.output_dim = w.rows;
    return model;
}

TrapRecord trap_with_vector(std::vector<double> v) {
    TrapRecord trap;
    trap.layer_id = "fc1.weight";
    trap.lambda_trap = 1.0;
    trap.eigenvector = std::move(v);
    return trap;
}

}  // namespace

TEST_CASE("rank-one layer aligned with the trap is fully replaced") {
    // W = sigma u v^T, 6x4 (tall, no transpose). Trap vector = v.
    Eigen::VectorXd u(6), v(4);
    u << 1, 2, 3, 4, 5, 6;
    v << 1, -1, 2, 0.5;
    u.normalize();
    v.normalize();
    const double sigma = 3.5;
    const Eigen::MatrixXd w_mat = sigma * u * v.transpose();
    const WeightMatrix w = from_eigen("fc1.weight", w_mat, "test");
    const MlpModel model = linear_model(w);

    const TrapRecord trap = trap_with_vector({v(0), v(1), v(2), v(3)});
    const TrapRemoval removal = remove_trap(model, "fc1.weight", trap, 42);
    CHECK(removal.overlap == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(removal.singular_value == doctest::Approx(sigma).epsilon(1e-9));
    CHECK_FALSE(removal.ambiguous);

    // The replaced layer is sigma u_rand v_rand^T: same spectral norm,
    // different direction, so generic inputs map differently.
    Eigen::MatrixXd replaced = removal.model.layers[0].weight.map();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(replaced);
    CHECK(svd.singularValues()(0) == doctest::Approx(sigma).epsilon(1e-9));

    const std::vector<double> x = {1.0, 0.5, -0.25, 2.0};
    CHECK(forward(model, x) != forward(removal.model, x));
}

TEST_CASE("trap aligned with a null singular direction changes nothing") {
    // Rank-one 6x4 layer; any direction orthogonal to v has singular value 0.
    Eigen::VectorXd u(6), v(4);
    u << 1, 1, 1, 1, 1, 1;
    v << 1, 0, 0, 0;
    u.normalize();
    const Eigen::MatrixXd w_mat = 2.0 * u * v.transpose();
    const MlpModel model = linear_model(from_eigen("fc1.weight", w_mat, "test"));

    // Orthogonal direction e2: maps to a zero singular component.
    const TrapRecord trap = trap_with_vector({0, 1, 0, 0});
    const TrapRemoval removal = remove_trap(model, "fc1.weight", trap, 7);
    CHECK(removal.singular_value <= 1e-12);

    for (const auto& x : {std::vector<double>{1, 2, 3, 4}, std::vector<double>{-1, 0, 2, 5}}) {
        const auto before = forward(model, x);
        const auto after = forward(removal.model, x);
        for (std::size_t i = 0; i < before.size(); ++i)
            CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-12));
    }
}

TEST_CASE("same seed reproduces the replaced model exactly") {
    const WeightMatrix w = oracles::gaussian_matrix("fc1.weight", 8, 5, 3);
    const MlpModel model = linear_model(w);
    const TrapRecord trap = trap_with_vector({1, 0, 0, 0, 0});
    const TrapRemoval a = remove_trap(model, "fc1.weight", trap, 99);
    const TrapRemoval b = remove_trap(model, "fc1.weight", trap, 99);
    CHECK(a.model.layers[0].weight.data == b.model.layers[0].weight.data);
    const TrapRemoval c = remove_trap(model, "fc1.weight", trap, 100);
    CHECK(a.model.layers[0].weight.data != c.model.layers[0].weight.data);
}

TEST_CASE("wide layers are handled through the transpose convention") {
    // 4x6 layer: the short side is the row space, trap vector length 4.
    const WeightMatrix w = oracles::gaussian_matrix("fc1.weight", 4, 6, 5);
    const MlpModel model = linear_model(w);
    const TrapRecord trap = trap_with_vector({0.5, 0.5, 0.5, 0.5});
    const TrapRemoval removal = remove_trap(model, "fc1.weight", trap, 1);
    CHECK(removal.model.layers[0].weight.rows == 4);
    CHECK(removal.model.layers[0].weight.cols == 6);
    CHECK(removal.singular_value > 0.0);
}

TEST_CASE("unknown layers and null layers are rejected") {
    const WeightMatrix w = oracles::gaussian_matrix("fc1.weight", 6, 4, 2);
    const MlpModel model = linear_model(w);
    const TrapRecord trap = trap_with_vector({1, 0, 0, 0});
    try {
        remove_trap(model, "fc9.weight", trap, 0);
        FAIL("expected LayerNotFound");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LayerNotFound);
    }

    const WeightMatrix zeros("fc1.weight", 6, 4, std::vector<double>(24, 0.0));
    try {
        remove_trap(linear_model(zeros), "fc1.weight", trap, 0);
        FAIL("expected DegenerateSvd");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateSvd);
    }
}

TEST_CASE("identical models score exactly zero divergence") {
    const MlpModel model = linear_model(oracles::gaussian_matrix("fc1.weight", 5, 4, 8));
    ProbeConfig probes;
    probes.num_probes = 64;
    probes.seed = 4;
    CHECK(jsd_score(model, model, probes) == 0.0);
}

TEST_CASE("disjoint near-one-hot outputs approach ln 2") {
    // Two constant models whose logits put all mass on different classes.
    MlpModel a = linear_model(WeightMatrix("fc1.weight", 2, 2, {0, 0, 0, 0}));
    MlpModel b = a;
    a.layers[0].bias = {100.0, -100.0};
    b.layers[0].bias = {-100.0, 100.0};
    ProbeConfig probes;
    probes.num_probes = 16;
    probes.seed = 1;
    const double score = jsd_score(a, b, probes);
    CHECK(std::abs(score - std::log(2.0)) < 1e-12);
}

TEST_CASE("extreme temperature flattens everything to uniform") {
    const MlpModel a = linear_model(oracles::gaussian_matrix("fc1.weight", 4, 6, 11));
    const MlpModel b = linear_model(oracles::gaussian_matrix("fc1.weight", 4, 6, 12));
    ProbeConfig probes;
    probes.num_probes = 32;
    probes.seed = 2;
    probes.temperature = 1e6;
    CHECK(jsd_score(a, b, probes) < 1e-6);
}

TEST_CASE("divergence is symmetric and bounded on random pairs") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MlpModel a =
            linear_model(oracles::gaussian_matrix("fc1.weight", 5, 7, seed));
        const MlpModel b =
            linear_model(oracles::gaussian_matrix("fc1.weight", 5, 7, seed + 100));
        ProbeConfig probes;
        probes.num_probes = 64;
        probes.seed = seed;
        const double ab = jsd_score(a, b, probes);
        const double ba = jsd_score(b, a, probes);
        CHECK(std::abs(ab - ba) <= 1e-12);
        CHECK(ab >= 0.0);
        CHECK(ab <= std::log(2.0) + 1e-12);
    }
}

TEST_CASE("shape mismatch and non-finite logits are rejected") {
    const MlpModel a = linear_model(oracles::gaussian_matrix("fc1.weight", 4, 6, 1));
    const MlpModel b = linear_model(oracles::gaussian_matrix("fc1.weight", 4, 5, 1));
    ProbeConfig probes;
    CHECK_THROWS_AS(jsd_score(a, b, probes), Error);

    WeightMatrix inf_w = oracles::gaussian_matrix("fc1.weight", 4, 6, 1);
    inf_w.data[0] = 1e308;
    inf_w.data[1] = 1e308;
    MlpModel c = linear_model(inf_w);
    MlpModel huge = c;
    for (double& x : huge.layers[0].weight.data) x *= 1e10;  // overflow squared terms
    // Deterministic overflow: scale until forward produces inf for a probe.
    probes.num_probes = 8;
    probes.seed = 3;
    probes.std = 1e300;
    try {
        jsd_score(c, huge, probes);
        FAIL("expected non-finite logits error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteEntry);
    }
}

TEST_CASE("result CSV export carries the documented columns") {
    AblationResult result;
    result.layer_id = "fc1.weight";
    result.trap_index = 0;
    result.lambda_trap = 12.5;
    result.ipr = 0.4;
    result.jsd = 0.02;
    result.delta_test_error = -0.01;
    result.classification = TrapClass::Benign;
    AblationResult unlabeled = result;
    unlabeled.delta_test_error.reset();
    unlabeled.classification = TrapClass::Unlabeled;

    const std::string csv = ablation_csv({result, unlabeled});
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "trap_id,layer,lambda,ipr,jsd,delta_err,class");
    std::getline(lines, line);
    CHECK(line == "0,fc1.weight,12.5,0.4,0.02,-0.01,Benign");
    std::getline(lines, line);
    CHECK(line == "1,fc1.weight,12.5,0.4,0.02,,Unlabeled");
}

TEST_CASE("classification follows the test-error change") {
    CHECK(classify_trap(0.5, 0.12, 0.05, 0.01) == TrapClass::Harmful);
    CHECK(classify_trap(1e-5, 0.002, 0.05, 0.01) == TrapClass::Benign);
    CHECK(classify_trap(0.3, std::nullopt, 0.05, 0.01) == TrapClass::Unlabeled);
    CHECK(classify_trap(0.5, -0.12, 0.05, 0.01) == TrapClass::Harmful);  // sign-free
    CHECK_THROWS_AS(classify_trap(0.5, 0.1, 0.0, 0.01), Error);
}
