#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "trapscan/self_averaging.hpp"
#include "trapscan/trap_detector.hpp"

using namespace trapscan;

namespace {

TrapRecord make_trap(const std::vector<double>& v, double lambda) {
    TrapRecord trap;
    trap.layer_id = "test";
    trap.lambda_trap = lambda;
    trap.eigenvector = v;
    return trap;
}

}  // namespace

TEST_CASE("constant overlap at hand-checked vectors") {
    std::vector<double> flat(16, 0.25);  // 1/sqrt(16)
    CHECK(constant_overlap(flat) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> balanced = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)};
    CHECK(constant_overlap(balanced) == doctest::Approx(0.0));

    std::vector<double> e1 = {1.0, 0.0, 0.0, 0.0};
    CHECK(constant_overlap(e1) == doctest::Approx(0.5).epsilon(1e-12));

    // Sign-flip invariance.
    std::vector<double> flipped = e1;
    for (double& x : flipped) x = -x;
    CHECK(constant_overlap(flipped) == constant_overlap(e1));

    std::vector<double> unnormalized(4, 1.0);
    CHECK_THROWS_AS(constant_overlap(unnormalized), Error);
}

TEST_CASE("all-ones matrix is the equality case of the bound") {
    const WeightMatrix a("ones", 4, 4, std::vector<double>(16, 1.0));
    // X = (1/4) A^T A = all-ones, eigenpair (4, [1/2,1/2,1/2,1/2]).
    const auto report =
        mean_instability_bound(a, make_trap(std::vector<double>(4, 0.5), 4.0));
    CHECK(report.eta == doctest::Approx(1.0));
    CHECK(report.bar_r == doctest::Approx(1.0));
    CHECK(report.row_mean_sq_avg == doctest::Approx(1.0));
    CHECK(report.bound == doctest::Approx(0.0));
    CHECK(report.row_mean_variance == doctest::Approx(0.0));
    CHECK(report.row_mean_variance >= report.bound - 1e-9);
}

TEST_CASE("alternating-row matrix is the tight variance case") {
    std::vector<double> data(16, 1.0);
    for (int j = 0; j < 4; ++j) {
        data[4 + j] = -1.0;   // row 1
        data[12 + j] = -1.0;  // row 3
    }
    const WeightMatrix a("alt", 4, 4, data);
    // A^T A = 4 J again, eigenpair (4, 1/2 * ones); r_i alternates +/- 1.
    const auto report =
        mean_instability_bound(a, make_trap(std::vector<double>(4, 0.5), 4.0));
    CHECK(report.eta == doctest::Approx(1.0));
    CHECK(report.bar_r == doctest::Approx(0.0));
    CHECK(report.bound == doctest::Approx(1.0));
    CHECK(report.row_mean_variance == doctest::Approx(1.0));
    CHECK(report.row_mean_variance >= report.bound - 1e-9);
}

TEST_CASE("zero constant overlap makes the bound trivially nonpositive") {
    const WeightMatrix a = oracles::gaussian_matrix("g", 6, 4, 9);
    std::vector<double> v = {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0), 0.0, 0.0};
    const auto report = mean_instability_bound(a, make_trap(v, 100.0));
    CHECK(report.eta == doctest::Approx(0.0));
    CHECK(report.bound <= 0.0);
    CHECK(report.row_mean_variance >= report.bound);
}

TEST_CASE("shape mismatch is rejected") {
    const WeightMatrix a = oracles::gaussian_matrix("g", 6, 4, 9);
    CHECK_THROWS_AS(mean_instability_bound(a, make_trap(std::vector<double>(6, 0.0), 1.0)),
                    Error);
}

TEST_CASE("real detected traps satisfy both inequalities") {
    // Dense constant shift: the planted direction survives shuffling, so the
    // trap aligns with the constant vector and the bound is active.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        WeightMatrix w = oracles::gaussian_matrix("const", 120, 60, seed);
        for (double& x : w.data) x += 0.6;
        const std::uint64_t base_seed = 100 + seed;
        const LayerTrapReport report = detect_traps(w, 2, base_seed, 4.0);
        REQUIRE(!report.traps.empty());
        for (const auto& trap : report.traps) {
            const WeightMatrix shuffled = shuffle_entries(
                w, {layer_seed(base_seed, w.layer_id), trap.replicate_index});
            Eigen::MatrixXd a = shuffled.map();
            if (a.rows() < a.cols()) a = a.transpose().eval();
            const auto inst = mean_instability_bound(
                from_eigen(w.layer_id, a, "oriented"), trap);
            CHECK(inst.row_mean_variance >= inst.bound - 1e-9);
            CHECK(inst.row_mean_sq_avg >=
                  inst.eta * inst.eta * inst.lambda_trap / static_cast<double>(a.cols()) -
                      1e-9);
            CHECK(inst.eta > 0.5);  // constant-aligned by construction
        }
    }
}

TEST_CASE("constant matrices have zero sampled variance at every scale") {
    const WeightMatrix a("const", 8, 10, std::vector<double>(80, 2.5));
    for (std::int64_t s : {1, 5, 10}) {
        const auto mc = sampled_mean_variance(a, s, 500, 4);
        CHECK(mc.value == doctest::Approx(0.0));
    }
}

TEST_CASE("scale s = M reduces to the row-mean variance") {
    const WeightMatrix a = oracles::gaussian_matrix("rows", 12, 6, 77);
    // Exact row-mean variance.
    std::vector<double> r(12, 0.0);
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 6; ++j) r[i] += a.at(i, j);
        r[i] /= 6.0;
    }
    double mean = 0.0;
    for (double x : r) mean += x;
    mean /= 12.0;
    double var = 0.0;
    for (double x : r) var += (x - mean) * (x - mean);
    var /= 12.0;

    const auto mc = sampled_mean_variance(a, 6, 200000, 5);
    CHECK(std::abs(mc.value - var) <= 4.0 * mc.standard_error + 1e-12);
}

TEST_CASE("alternating rows at scale 2 concentrate at variance 1") {
    std::vector<double> data(16, 1.0);
    for (int j = 0; j < 4; ++j) {
        data[4 + j] = -1.0;
        data[12 + j] = -1.0;
    }
    const WeightMatrix a("alt", 4, 4, data);
    const auto mc = sampled_mean_variance(a, 2, 100000, 6);
    // Rows are constant, so mu = r_I exactly: Var = 1.
    CHECK(mc.value >= 1.0 - 3.0 * mc.standard_error);
    CHECK(mc.value == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("law of total variance: sampled variance dominates row-mean variance") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const WeightMatrix a = oracles::gaussian_matrix("ltv", 20, 14, seed);
        std::vector<double> r(20, 0.0);
        for (int i = 0; i < 20; ++i) {
            for (int j = 0; j < 14; ++j) r[i] += a.at(i, j);
            r[i] /= 14.0;
        }
        double mean = 0.0;
        for (double x : r) mean += x;
        mean /= 20.0;
        double var = 0.0;
        for (double x : r) var += (x - mean) * (x - mean);
        var /= 20.0;

        for (std::int64_t s : {1, 7, 14}) {
            const auto mc = sampled_mean_variance(a, s, 20000, seed + 50);
            CHECK(mc.value >= var - 3.0 * mc.standard_error);
        }
    }
}

TEST_CASE("domain checks for the sampler") {
    const WeightMatrix a = oracles::gaussian_matrix("dom", 5, 5, 1);
    CHECK_THROWS_AS(sampled_mean_variance(a, 0, 1000, 1), Error);
    CHECK_THROWS_AS(sampled_mean_variance(a, 6, 1000, 1), Error);
    CHECK_THROWS_AS(sampled_mean_variance(a, 2, 99, 1), Error);
}
