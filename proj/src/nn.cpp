#include "trapscan/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "trapscan/numeric.hpp"
#include "trapscan/rng.hpp"

namespace trapscan {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr const char* kWeightSuffix = ".weight";
constexpr const char* kBiasSuffix = ".bias";

std::string step_tag(std::int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%08lld", static_cast<long long>(step));
    return buf;
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

void MlpModel::validate() const {
    if (layers.empty()) raise(ErrorCode::Dimension, "model has no layers");
    std::int64_t in = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        layer.weight.validate_shape();
        if (layer.weight.cols != in)
            raise(ErrorCode::ShapeMismatch,
                  "layer " + std::to_string(l) + " expects input " +
                      std::to_string(layer.weight.cols) + ", got " + std::to_string(in));
        if (static_cast<std::int64_t>(layer.bias.size()) != layer.weight.rows)
            raise(ErrorCode::ShapeMismatch,
                  "layer " + std::to_string(l) + " bias length mismatch");
        in = layer.weight.rows;
    }
    if (in != output_dim)
        raise(ErrorCode::ShapeMismatch, "output dimension mismatch");
}

void Dataset::validate() const {
    if (inputs.empty()) raise(ErrorCode::Domain, "dataset is empty");
    if (inputs.size() != labels.size())
        raise(ErrorCode::Domain, "inputs and labels length mismatch");
    const std::size_t d = inputs[0].size();
    for (const auto& x : inputs)
        if (x.size() != d) raise(ErrorCode::Domain, "inputs have mixed dimensions");
    for (std::int64_t y : labels)
        if (y < 0 || y >= num_classes) raise(ErrorCode::Domain, "label out of range");
}

double Dataset::input_mean() const {
    std::vector<double> flat;
    for (const auto& x : inputs) flat.insert(flat.end(), x.begin(), x.end());
    return mean_of(flat);
}

double Dataset::input_std() const {
    std::vector<double> flat;
    for (const auto& x : inputs) flat.insert(flat.end(), x.begin(), x.end());
    return population_std(flat);
}

void TrainConfig::validate() const {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        raise(ErrorCode::Domain, "betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) raise(ErrorCode::Domain, "epsilon must be positive");
    if (!(learning_rate > 0.0)) raise(ErrorCode::Domain, "learning rate must be positive");
    if (weight_decay < 0.0) raise(ErrorCode::Domain, "weight decay must be >= 0");
    if (batch_size < 1) raise(ErrorCode::Domain, "batch size must be >= 1");
    if (steps < 0) raise(ErrorCode::Domain, "steps must be >= 0");
    if (!(init_scale > 0.0)) raise(ErrorCode::Domain, "init scale must be positive");
}

MlpModel make_mlp(const std::vector<std::int64_t>& widths, double init_scale,
                  std::uint64_t seed) {
    if (widths.size() < 2) raise(ErrorCode::Domain, "need at least input and output widths");
    auto eng = rng::make_engine(rng::mix(seed, 0x6d6c70u));

    MlpModel model;
    model.input_dim = widths.front();
    model.output_dim = widths.back();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::int64_t fan_in = widths[l];
        const std::int64_t fan_out = widths[l + 1];
        // Fan-in-scaled uniform bound, then everything multiplied by
        // init_scale (large values induce the delayed-generalization regime).
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        MlpLayer layer;
        std::vector<double> data(static_cast<std::size_t>(fan_in * fan_out));
        for (double& x : data)
            x = init_scale * bound * (2.0 * rng::unit_double(eng) - 1.0);
        layer.weight = WeightMatrix("fc" + std::to_string(l + 1) + kWeightSuffix, fan_out,
                                    fan_in, std::move(data), "init");
        layer.bias.resize(static_cast<std::size_t>(fan_out));
        for (double& x : layer.bias)
            x = init_scale * bound * (2.0 * rng::unit_double(eng) - 1.0);
        model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
}

std::vector<double> forward(const MlpModel& model, const std::vector<double>& x) {
    if (static_cast<std::int64_t>(x.size()) != model.input_dim)
        raise(ErrorCode::ShapeMismatch,
              "input dimension " + std::to_string(x.size()) + " != " +
                  std::to_string(model.input_dim));
    VectorXd a = Eigen::Map<const VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        VectorXd z = layer.weight.map() * a +
                     Eigen::Map<const VectorXd>(layer.bias.data(),
                                                static_cast<Eigen::Index>(layer.bias.size()));
        if (l + 1 < model.layers.size()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return std::vector<double>(a.data(), a.data() + a.size());
}

namespace {

struct BatchTensors {
    MatrixXd inputs;   // in x B
    MatrixXd targets;  // C x B one-hot
    std::vector<std::int64_t> labels;
};

BatchTensors gather_batch(const Dataset& data, const std::vector<std::int64_t>& order,
                          std::int64_t start, std::int64_t count, std::int64_t classes) {
    BatchTensors batch;
    const std::int64_t dim = data.dim();
    batch.inputs.resize(dim, count);
    batch.targets = MatrixXd::Zero(classes, count);
    batch.labels.resize(static_cast<std::size_t>(count));
    for (std::int64_t b = 0; b < count; ++b) {
        const std::int64_t idx = order[static_cast<std::size_t>(start + b)];
        const auto& x = data.inputs[static_cast<std::size_t>(idx)];
        for (std::int64_t j = 0; j < dim; ++j) batch.inputs(j, b) = x[static_cast<std::size_t>(j)];
        const std::int64_t y = data.labels[static_cast<std::size_t>(idx)];
        batch.targets(y, b) = 1.0;
        batch.labels[static_cast<std::size_t>(b)] = y;
    }
    return batch;
}

struct ForwardPass {
    std::vector<MatrixXd> pre_activations;  // Z_l per layer
    std::vector<MatrixXd> activations;      // A_0 = inputs, A_l = relu(Z_{l-1})
};

ForwardPass forward_batch(const std::vector<MatrixXd>& weights,
                          const std::vector<VectorXd>& biases, const MatrixXd& inputs) {
    ForwardPass pass;
    pass.activations.push_back(inputs);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        MatrixXd z = weights[l] * pass.activations.back();
        z.colwise() += biases[l];
        pass.pre_activations.push_back(z);
        if (l + 1 < weights.size())
            pass.activations.push_back(z.cwiseMax(0.0));
    }
    return pass;
}

// Mean squared error against one-hot targets, averaged over batch * classes.
double batch_loss(const MatrixXd& logits, const MatrixXd& targets) {
    std::vector<double> per_sample(static_cast<std::size_t>(logits.cols()));
    for (Eigen::Index b = 0; b < logits.cols(); ++b)
        per_sample[static_cast<std::size_t>(b)] = (logits.col(b) - targets.col(b)).squaredNorm();
    return pairwise_sum(per_sample) /
           (static_cast<double>(logits.cols()) * static_cast<double>(logits.rows()));
}

double batch_accuracy(const MatrixXd& logits, const std::vector<std::int64_t>& labels) {
    std::int64_t hits = 0;
    for (Eigen::Index b = 0; b < logits.cols(); ++b) {
        Eigen::Index best;
        logits.col(b).maxCoeff(&best);  // first maximum on ties
        if (best == labels[static_cast<std::size_t>(b)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.cols());
}

struct Gradients {
    std::vector<MatrixXd> weights;
    std::vector<VectorXd> biases;
};

Gradients backward_batch(const std::vector<MatrixXd>& weights, const ForwardPass& pass,
                         const MatrixXd& targets) {
    const std::size_t depth = weights.size();
    Gradients grads;
    grads.weights.resize(depth);
    grads.biases.resize(depth);

    const MatrixXd& logits = pass.pre_activations.back();
    const double scale =
        2.0 / (static_cast<double>(logits.cols()) * static_cast<double>(logits.rows()));
    MatrixXd delta = scale * (logits - targets);
    for (std::size_t l = depth; l-- > 0;) {
        grads.weights[l] = delta * pass.activations[l].transpose();
        grads.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (weights[l].transpose() * delta).eval();
            delta = delta.array() * (pass.pre_activations[l - 1].array() > 0.0).cast<double>();
        }
    }
    return grads;
}

// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p),
// so wd = 0 reduces to plain Adam bit for bit.
struct AdamWState {
    std::vector<MatrixXd> m_w, v_w;
    std::vector<VectorXd> m_b, v_b;
    std::int64_t t = 0;

    void init(const std::vector<MatrixXd>& weights, const std::vector<VectorXd>& biases) {
        for (const auto& w : weights) {
            m_w.push_back(MatrixXd::Zero(w.rows(), w.cols()));
            v_w.push_back(MatrixXd::Zero(w.rows(), w.cols()));
        }
        for (const auto& b : biases) {
            m_b.push_back(VectorXd::Zero(b.size()));
            v_b.push_back(VectorXd::Zero(b.size()));
        }
    }

    void step(std::vector<MatrixXd>& weights, std::vector<VectorXd>& biases,
              const Gradients& grads, const TrainConfig& cfg) {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t l = 0; l < weights.size(); ++l) {
            m_w[l] = cfg.beta1 * m_w[l] + (1.0 - cfg.beta1) * grads.weights[l];
            v_w[l] = cfg.beta2 * v_w[l] +
                     (1.0 - cfg.beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
            weights[l].array() -=
                cfg.learning_rate *
                ((m_w[l].array() / bc1) / ((v_w[l].array() / bc2).sqrt() + cfg.epsilon) +
                 cfg.weight_decay * weights[l].array());

            m_b[l] = cfg.beta1 * m_b[l] + (1.0 - cfg.beta1) * grads.biases[l];
            v_b[l] = cfg.beta2 * v_b[l] +
                     (1.0 - cfg.beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
            biases[l].array() -=
                cfg.learning_rate *
                ((m_b[l].array() / bc1) / ((v_b[l].array() / bc2).sqrt() + cfg.epsilon) +
                 cfg.weight_decay * biases[l].array());
        }
    }
};

void sync_model(MlpModel& model, const std::vector<MatrixXd>& weights,
                const std::vector<VectorXd>& biases) {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < weights[l].cols(); ++j)
                layer.weight.at(i, j) = weights[l](i, j);
        for (Eigen::Index i = 0; i < biases[l].size(); ++i)
            layer.bias[static_cast<std::size_t>(i)] = biases[l](i);
    }
}

}  // namespace

LossGradients loss_gradients(const MlpModel& model, const Dataset& data) {
    model.validate();
    data.validate();
    if (data.dim() != model.input_dim)
        raise(ErrorCode::ShapeMismatch, "dataset dimension does not match model input");
    if (data.num_classes != model.output_dim)
        raise(ErrorCode::ShapeMismatch, "dataset classes do not match model output");

    std::vector<std::int64_t> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), std::int64_t{0});
    const BatchTensors tensors = gather_batch(data, order, 0, data.size(), data.num_classes);

    std::vector<MatrixXd> weights;
    std::vector<VectorXd> biases;
    for (const auto& layer : model.layers) {
        weights.emplace_back(layer.weight.map());
        biases.emplace_back(Eigen::Map<const VectorXd>(
            layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size())));
    }
    const ForwardPass pass = forward_batch(weights, biases, tensors.inputs);
    const Gradients grads = backward_batch(weights, pass, tensors.targets);

    LossGradients out;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        out.weights.push_back(from_eigen(model.layers[l].weight.layer_id + "#grad",
                                         grads.weights[l], "gradient"));
        out.biases.emplace_back(grads.biases[l].data(),
                                grads.biases[l].data() + grads.biases[l].size());
    }
    return out;
}

std::pair<double, double> evaluate(const MlpModel& model, const Dataset& data) {
    model.validate();
    data.validate();
    if (data.dim() != model.input_dim)
        raise(ErrorCode::ShapeMismatch, "dataset dimension does not match model input");
    if (data.num_classes != model.output_dim)
        raise(ErrorCode::ShapeMismatch, "dataset classes do not match model output");

    std::int64_t hits = 0;
    std::vector<double> per_sample(static_cast<std::size_t>(data.size()));
    for (std::int64_t i = 0; i < data.size(); ++i) {
        const auto logits = forward(model, data.inputs[static_cast<std::size_t>(i)]);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c)
            if (logits[c] > logits[best]) best = c;
        if (static_cast<std::int64_t>(best) == data.labels[static_cast<std::size_t>(i)]) ++hits;
        double err = 0.0;
        for (std::size_t c = 0; c < logits.size(); ++c) {
            const double target =
                (static_cast<std::int64_t>(c) == data.labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
            const double d = logits[c] - target;
            err += d * d;
        }
        per_sample[static_cast<std::size_t>(i)] = err;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(data.size());
    const double loss = pairwise_sum(per_sample) /
                        (static_cast<double>(data.size()) * static_cast<double>(model.output_dim));
    return {acc, loss};
}

TrainResult train(MlpModel& model, const Dataset& data, const TrainConfig& config,
                  const TrainRun& run) {
    model.validate();
    data.validate();
    config.validate();
    if (data.dim() != model.input_dim)
        raise(ErrorCode::ShapeMismatch, "dataset dimension does not match model input");
    if (data.num_classes != model.output_dim)
        raise(ErrorCode::ShapeMismatch, "dataset classes do not match model output");

    namespace fs = std::filesystem;
    if (!run.checkpoint_dir.empty()) fs::create_directories(run.checkpoint_dir);

    std::vector<MatrixXd> weights;
    std::vector<VectorXd> biases;
    for (const auto& layer : model.layers) {
        weights.emplace_back(layer.weight.map());
        biases.emplace_back(Eigen::Map<const VectorXd>(
            layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size())));
    }
    AdamWState optimizer;
    optimizer.init(weights, biases);

    std::vector<std::int64_t> schedule = config.checkpoint_schedule;
    std::sort(schedule.begin(), schedule.end());
    schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());

    TrainResult result;
    const double probe_mean = data.input_mean();
    const double probe_std = data.input_std();

    const auto emit_checkpoint = [&](std::int64_t step) {
        sync_model(model, weights, biases);
        const auto [train_acc, train_loss] = evaluate(model, data);
        std::map<std::string, std::string> metadata;
        metadata["step"] = std::to_string(step);
        metadata["train_acc"] = format_double(train_acc);
        metadata["train_loss"] = format_double(train_loss);
        if (run.eval) {
            const auto [eval_acc, eval_loss] = evaluate(model, *run.eval);
            metadata["test_acc"] = format_double(eval_acc);
            metadata["test_loss"] = format_double(eval_loss);
        }
        metadata["input_mean"] = format_double(probe_mean);
        metadata["input_std"] = format_double(probe_std);
        if (!run.checkpoint_dir.empty()) {
            const std::string stem =
                (fs::path(run.checkpoint_dir) / step_tag(step)).string();
            save_checkpoint(model_to_layers(model), metadata, stem, run.model_name, step);
            result.checkpoint_paths.push_back(stem + ".json");
        }
        if (run.keep_snapshots) result.snapshots.emplace_back(step, model);
    };

    const auto scheduled = [&](std::int64_t step) {
        return std::binary_search(schedule.begin(), schedule.end(), step);
    };

    if (scheduled(0) || config.steps == 0) emit_checkpoint(0);

    const std::int64_t n = data.size();
    const std::int64_t batch = std::min<std::int64_t>(config.batch_size, n);
    auto order_eng = rng::make_engine(rng::mix(config.seed, 0x6f72646572u));
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::int64_t{0});
    std::int64_t cursor = n;  // forces a shuffle before the first batch

    for (std::int64_t step = 1; step <= config.steps; ++step) {
        if (cursor + batch > n) {
            if (batch < n) {  // full-batch steps keep the dataset order
                for (std::size_t i = order.size() - 1; i > 0; --i) {
                    const std::size_t j =
                        static_cast<std::size_t>(rng::below(order_eng, i + 1));
                    std::swap(order[i], order[j]);
                }
            }
            cursor = 0;
        }
        const BatchTensors tensors =
            gather_batch(data, order, cursor, batch, data.num_classes);
        cursor += batch;

        const ForwardPass pass = forward_batch(weights, biases, tensors.inputs);
        const MatrixXd& logits = pass.pre_activations.back();
        const double loss = batch_loss(logits, tensors.targets);
        if (!std::isfinite(loss))
            raise(ErrorCode::Divergence,
                  "loss became non-finite at step " + std::to_string(step));

        LogRow row;
        row.step = step;
        row.train_loss = loss;
        row.train_acc = batch_accuracy(logits, tensors.labels);
        result.log.push_back(row);

        const Gradients grads = backward_batch(weights, pass, tensors.targets);
        optimizer.step(weights, biases, grads, config);

        if (scheduled(step)) {
            emit_checkpoint(step);
            auto& logged = result.log.back();
            if (run.eval) {
                const auto [eval_acc, eval_loss] = evaluate(model, *run.eval);
                logged.eval_acc = eval_acc;
                logged.eval_loss = eval_loss;
            }
        }
    }
    sync_model(model, weights, biases);
    return result;
}

MlpModel inject_trap(const MlpModel& model, std::int64_t layer_index, double magnitude,
                     std::int64_t k, std::uint64_t seed) {
    model.validate();
    if (layer_index < 0 || layer_index >= static_cast<std::int64_t>(model.layers.size()))
        raise(ErrorCode::Domain, "layer index out of range");
    MlpModel out = model;
    auto& weight = out.layers[static_cast<std::size_t>(layer_index)].weight;
    const std::int64_t total = weight.size();
    if (k < 0 || k > total) raise(ErrorCode::Domain, "k must lie in [0, rows*cols]");

    // Same-sign increments: a dense injection shifts every entry equally and
    // survives shuffling as a constant-aligned outlier; a sparse large one
    // lands as a localized outlier.
    auto eng = rng::make_engine(rng::mix(seed, 0x7472617fu));
    std::vector<std::int64_t> index(static_cast<std::size_t>(total));
    std::iota(index.begin(), index.end(), std::int64_t{0});
    for (std::int64_t j = 0; j < k; ++j) {
        const std::int64_t pick =
            j + static_cast<std::int64_t>(rng::below(eng, static_cast<std::uint64_t>(total - j)));
        std::swap(index[static_cast<std::size_t>(j)], index[static_cast<std::size_t>(pick)]);
        weight.data[static_cast<std::size_t>(index[static_cast<std::size_t>(j)])] += magnitude;
    }
    return out;
}

Dataset make_gaussian_clusters(std::int64_t classes, std::int64_t dim,
                               std::int64_t per_class, double noise, std::uint64_t seed,
                               double separation, std::uint64_t sample_stream) {
    if (classes < 2 || dim < 1 || per_class < 1)
        raise(ErrorCode::Domain, "need >= 2 classes, dim >= 1, per_class >= 1");

    // Means come from the seed alone, so train/test splits built with
    // different sample streams describe the same task.
    auto mean_eng = rng::make_engine(rng::mix(seed, 0x6d65616e73u));
    std::vector<std::vector<double>> means(static_cast<std::size_t>(classes));
    for (auto& mean : means) {
        mean.resize(static_cast<std::size_t>(dim));
        double norm_sq = 0.0;
        for (double& x : mean) {
            x = rng::gaussian(mean_eng);
            norm_sq += x * x;
        }
        const double scale = separation / std::max(1e-12, std::sqrt(norm_sq));
        for (double& x : mean) x *= scale;
    }

    auto eng = rng::make_engine(rng::mix(rng::mix(seed, 0x64617461u), sample_stream));
    Dataset data;
    data.num_classes = classes;
    for (std::int64_t c = 0; c < classes; ++c) {
        for (std::int64_t i = 0; i < per_class; ++i) {
            std::vector<double> x(static_cast<std::size_t>(dim));
            for (std::int64_t j = 0; j < dim; ++j)
                x[static_cast<std::size_t>(j)] =
                    means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                    noise * rng::gaussian(eng);
            data.inputs.push_back(std::move(x));
            data.labels.push_back(c);
        }
    }
    return data;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::Io, "cannot open dataset '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::MalformedManifest, "dataset is not valid JSON: " + std::string(e.what()));
    }
    Dataset data;
    try {
        data.num_classes = doc.at("num_classes").get<std::int64_t>();
        for (const auto& row : doc.at("inputs"))
            data.inputs.push_back(row.get<std::vector<double>>());
        for (const auto& label : doc.at("labels"))
            data.labels.push_back(label.get<std::int64_t>());
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::MalformedManifest,
              "dataset missing or mistyped field: " + std::string(e.what()));
    }
    data.validate();
    return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
    data.validate();
    nlohmann::ordered_json doc;
    doc["schema"] = "trapscan/dataset/v1";
    doc["num_classes"] = data.num_classes;
    doc["inputs"] = data.inputs;
    doc["labels"] = data.labels;
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorCode::Io, "cannot write dataset '" + path + "'");
    out << doc.dump() << "\n";
    if (!out) raise(ErrorCode::Io, "failed writing dataset '" + path + "'");
}

std::vector<WeightMatrix> model_to_layers(const MlpModel& model, const std::string& prefix) {
    std::vector<WeightMatrix> layers;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const std::string name = prefix + std::to_string(l + 1);
        WeightMatrix weight = model.layers[l].weight;
        weight.layer_id = name + kWeightSuffix;
        layers.push_back(std::move(weight));
        layers.emplace_back(name + kBiasSuffix,
                            static_cast<std::int64_t>(model.layers[l].bias.size()), 1,
                            model.layers[l].bias, "bias");
    }
    return layers;
}

MlpModel model_from_checkpoint(const Checkpoint& ckpt) {
    MlpModel model;
    const auto& layers = ckpt.layers;
    for (std::size_t i = 0; i < layers.size();) {
        const auto& weight = layers[i];
        if (weight.layer_id.size() < std::strlen(kWeightSuffix) ||
            weight.layer_id.substr(weight.layer_id.size() - std::strlen(kWeightSuffix)) !=
                kWeightSuffix)
            raise(ErrorCode::MalformedManifest,
                  "checkpoint is not a feed-forward model: expected '*.weight', got '" +
                      weight.layer_id + "'");
        MlpLayer layer;
        layer.weight = weight;
        ++i;
        if (i < layers.size() && layers[i].layer_id.size() > std::strlen(kBiasSuffix) &&
            layers[i].layer_id.substr(layers[i].layer_id.size() - std::strlen(kBiasSuffix)) ==
                kBiasSuffix) {
            if (layers[i].rows != weight.rows || layers[i].cols != 1)
                raise(ErrorCode::ShapeMismatch,
                      "bias '" + layers[i].layer_id + "' does not match its weight");
            layer.bias = layers[i].data;
            ++i;
        } else {
            layer.bias.assign(static_cast<std::size_t>(weight.rows), 0.0);
        }
        model.layers.push_back(std::move(layer));
    }
    if (model.layers.empty())
        raise(ErrorCode::MalformedManifest, "checkpoint holds no layers");
    model.input_dim = model.layers.front().weight.cols;
    model.output_dim = model.layers.back().weight.rows;
    model.validate();
    return model;
}

}  // namespace trapscan
