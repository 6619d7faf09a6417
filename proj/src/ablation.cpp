#include "trapscan/ablation.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "trapscan/numeric.hpp"
#include "trapscan/rng.hpp"

namespace trapscan {

const char* trap_class_name(TrapClass c) {
    switch (c) {
        case TrapClass::Harmful: return "Harmful";
        case TrapClass::Benign: return "Benign";
        case TrapClass::Unlabeled: return "Unlabeled";
    }
    return "Unlabeled";
}

namespace {

Eigen::VectorXd random_unit(rng::Engine& eng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    double norm_sq = 0.0;
    do {
        for (Eigen::Index i = 0; i < n; ++i) v(i) = rng::gaussian(eng);
        norm_sq = v.squaredNorm();
    } while (!(norm_sq > 0.0));
    return v / std::sqrt(norm_sq);
}

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits, double temperature) {
    Eigen::VectorXd scaled = logits / temperature;
    const double peak = scaled.maxCoeff();
    Eigen::VectorXd p = (scaled.array() - peak).exp();
    return p / p.sum();
}

// JS divergence with natural log; terms with p_i == 0 contribute zero and
// m_i >= p_i / 2 keeps every log argument positive.
double js_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p(i) + q(i));
        if (p(i) > 0.0) acc += 0.5 * p(i) * std::log(p(i) / m);
        if (q(i) > 0.0) acc += 0.5 * q(i) * std::log(q(i) / m);
    }
    return std::max(0.0, acc);
}

}  // namespace

TrapRemoval remove_trap(const MlpModel& model, const std::string& layer_id,
                        const TrapRecord& trap, std::uint64_t seed) {
    model.validate();
    std::size_t layer_index = model.layers.size();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (model.layers[l].weight.layer_id == layer_id) {
            layer_index = l;
            break;
        }
    }
    if (layer_index == model.layers.size())
        raise(ErrorCode::LayerNotFound, "no layer named '" + layer_id + "'");

    const WeightMatrix& weight = model.layers[layer_index].weight;
    Eigen::MatrixXd a = weight.map();
    const bool transposed = a.rows() < a.cols();
    if (transposed) a = a.transpose().eval();
    const Eigen::Index m_short = a.cols();
    if (static_cast<Eigen::Index>(trap.eigenvector.size()) != m_short)
        raise(ErrorCode::ShapeMismatch,
              "trap eigenvector length does not match layer short side");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        raise(ErrorCode::Numerical, "SVD failed to converge on layer '" + layer_id + "'");
    if (svd.singularValues()(0) < 1e-12)
        raise(ErrorCode::DegenerateSvd, "layer '" + layer_id + "' is numerically null");

    const Eigen::Map<const Eigen::VectorXd> v_trap(trap.eigenvector.data(), m_short);
    Eigen::Index best = 0;
    double best_overlap = -1.0;
    for (Eigen::Index k = 0; k < svd.matrixV().cols(); ++k) {
        const double overlap = std::abs(svd.matrixV().col(k).dot(v_trap));
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = k;
        }
    }

    const double sigma = svd.singularValues()(best);
    auto eng = rng::make_engine(rng::mix(seed, 0x61626c8u));
    const Eigen::VectorXd u_rand = random_unit(eng, a.rows());
    const Eigen::VectorXd v_rand = random_unit(eng, a.cols());

    // Swap the trap-aligned rank-one component for a random one of equal
    // singular value; the layer's spectral scale is preserved.
    Eigen::MatrixXd replaced =
        a - sigma * svd.matrixU().col(best) * svd.matrixV().col(best).transpose() +
        sigma * u_rand * v_rand.transpose();
    if (transposed) replaced = replaced.transpose().eval();

    TrapRemoval removal;
    removal.model = model;
    removal.overlap = best_overlap;
    removal.singular_index = best;
    removal.singular_value = sigma;
    removal.ambiguous = best_overlap < 0.3;
    auto& out_weight = removal.model.layers[layer_index].weight;
    for (std::int64_t i = 0; i < out_weight.rows; ++i)
        for (std::int64_t j = 0; j < out_weight.cols; ++j)
            out_weight.at(i, j) = replaced(i, j);
    return removal;
}

double jsd_score(const MlpModel& model, const MlpModel& ablated, const ProbeConfig& probes) {
    model.validate();
    ablated.validate();
    if (model.input_dim != ablated.input_dim || model.output_dim != ablated.output_dim)
        raise(ErrorCode::ShapeMismatch, "models do not share input/output dimensions");
    if (probes.num_probes < 1) raise(ErrorCode::Domain, "need at least one probe");
    if (!(probes.std > 0.0)) raise(ErrorCode::Domain, "probe std must be positive");
    if (!(probes.temperature > 0.0)) raise(ErrorCode::Domain, "temperature must be positive");

    auto eng = rng::make_engine(rng::mix(probes.seed, 0x70726f6265u));
    std::vector<double> scores(static_cast<std::size_t>(probes.num_probes));
    std::vector<double> x(static_cast<std::size_t>(model.input_dim));
    for (std::int64_t p = 0; p < probes.num_probes; ++p) {
        for (double& xi : x) xi = probes.mean + probes.std * rng::gaussian(eng);
        const auto za = forward(model, x);
        const auto zb = forward(ablated, x);
        for (double z : za)
            if (!std::isfinite(z)) raise(ErrorCode::NonFiniteEntry, "non-finite logits from model");
        for (double z : zb)
            if (!std::isfinite(z)) raise(ErrorCode::NonFiniteEntry, "non-finite logits from ablated model");
        const Eigen::VectorXd pa = stable_softmax(
            Eigen::Map<const Eigen::VectorXd>(za.data(), static_cast<Eigen::Index>(za.size())),
            probes.temperature);
        const Eigen::VectorXd pb = stable_softmax(
            Eigen::Map<const Eigen::VectorXd>(zb.data(), static_cast<Eigen::Index>(zb.size())),
            probes.temperature);
        scores[static_cast<std::size_t>(p)] = js_divergence(pa, pb);
    }
    return mean_of(scores);
}

TrapClass classify_trap(double jsd, std::optional<double> delta_test_error, double tau_jsd,
                        double tau_err) {
    if (!(tau_jsd > 0.0) || !(tau_err > 0.0))
        raise(ErrorCode::Domain, "classification thresholds must be positive");
    (void)jsd;  // reported alongside; the label follows the test-error change
    if (!delta_test_error.has_value()) return TrapClass::Unlabeled;
    return std::abs(*delta_test_error) > tau_err ? TrapClass::Harmful : TrapClass::Benign;
}

}  // namespace trapscan
