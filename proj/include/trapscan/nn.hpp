#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trapscan/matrix.hpp"
#include "trapscan/tensor_store.hpp"

// Minimal feed-forward engine: affine layers with ReLU between them and an
// identity output, MSE loss against one-hot targets, decoupled-weight-decay
// Adam training, and checkpoint emission through the tensor store. Enough to
// generate desk-scale training trajectories and to drive ablation probes.

namespace trapscan {

struct MlpLayer {
    WeightMatrix weight;       // out x in
    std::vector<double> bias;  // length out
};

struct MlpModel {
    std::vector<MlpLayer> layers;
    std::int64_t input_dim = 0;
    std::int64_t output_dim = 0;

    void validate() const;  // adjacent shapes must compose
};

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<std::int64_t> labels;
    std::int64_t num_classes = 0;

    std::int64_t size() const { return static_cast<std::int64_t>(inputs.size()); }
    std::int64_t dim() const { return inputs.empty() ? 0 : static_cast<std::int64_t>(inputs[0].size()); }
    void validate() const;
    double input_mean() const;
    double input_std() const;
};

struct TrainConfig {
    double learning_rate = 5e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t batch_size = 200;
    std::int64_t steps = 0;
    double init_scale = 8.0;
    std::uint64_t seed = 0;
    std::vector<std::int64_t> checkpoint_schedule;  // step indices; 0 = init

    void validate() const;
};

struct LogRow {
    std::int64_t step = 0;
    double train_acc = 0.0;
    double train_loss = 0.0;
    std::optional<double> eval_acc;
    std::optional<double> eval_loss;
};

struct TrainResult {
    std::vector<LogRow> log;  // one row per optimization step
    std::vector<std::string> checkpoint_paths;
    std::vector<std::pair<std::int64_t, MlpModel>> snapshots;  // when keep_snapshots
};

struct TrainRun {
    const Dataset* eval = nullptr;       // optional held-out set
    std::string checkpoint_dir;          // empty = no files written
    std::string model_name = "mlp";
    bool keep_snapshots = false;
};

// Fan-in-scaled uniform init, all parameters multiplied by init_scale.
MlpModel make_mlp(const std::vector<std::int64_t>& widths, double init_scale,
                  std::uint64_t seed);

std::vector<double> forward(const MlpModel& model, const std::vector<double>& x);

std::pair<double, double> evaluate(const MlpModel& model, const Dataset& data);

struct LossGradients {
    std::vector<WeightMatrix> weights;        // shapes match the model layers
    std::vector<std::vector<double>> biases;
};

// Full-batch analytic gradient of the evaluate() loss, computed by the same
// backward pass the trainer uses.
LossGradients loss_gradients(const MlpModel& model, const Dataset& data);

TrainResult train(MlpModel& model, const Dataset& data, const TrainConfig& config,
                  const TrainRun& run = {});

// Adds +magnitude to k seeded entry positions of one layer's weights.
// Large magnitudes on few entries produce localized shuffled-spectrum
// outliers; a dense injection produces a constant-aligned one.
MlpModel inject_trap(const MlpModel& model, std::int64_t layer_index, double magnitude,
                     std::int64_t k, std::uint64_t seed);

// Gaussian-cluster classification task; deterministic stand-in dataset.
// Class means depend only on `seed`; `sample_stream` selects independent
// sample draws around the same means (0 = train split, 1 = test split, ...).
Dataset make_gaussian_clusters(std::int64_t classes, std::int64_t dim,
                               std::int64_t per_class, double noise,
                               std::uint64_t seed, double separation = 2.0,
                               std::uint64_t sample_stream = 0);

Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& data, const std::string& path);

// Checkpoint layout: per layer "<name>.weight" (out x in) and "<name>.bias"
// (out x 1), in network order.
std::vector<WeightMatrix> model_to_layers(const MlpModel& model,
                                          const std::string& prefix = "fc");
MlpModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace trapscan
