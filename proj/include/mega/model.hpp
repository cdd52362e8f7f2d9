#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mega/dataset.hpp"
#include "mega/matrix.hpp"
#include "mega/rng.hpp"

namespace mega {

enum class Activation { Relu };

/// Feedforward classifier architecture: dense layers, relu on hidden layers,
/// softmax over the final width.
struct ModelSpec {
    std::vector<std::uint32_t> layer_widths;  // input dim, hidden..., classes
    Activation hidden_activation = Activation::Relu;

    void validate() const;  // ConfigError unless >= 2 widths, all >= 1
    std::size_t parameter_count() const;
    std::uint32_t input_dim() const { return layer_widths.front(); }
    std::uint32_t num_classes() const { return layer_widths.back(); }
    std::size_t layer_count() const { return layer_widths.size() - 1; }

    bool operator==(const ModelSpec&) const = default;
};

/// Per-layer weights (fan_in x fan_out) and biases (fan_out).
struct LayeredParams {
    struct Layer {
        Matrix weights;
        std::vector<double> bias;
        bool operator==(const Layer&) const = default;
    };
    std::vector<Layer> layers;

    static LayeredParams zeros(const ModelSpec& spec);
    bool matches(const ModelSpec& spec) const;

    bool operator==(const LayeredParams&) const = default;
};

struct TrainConfig {
    std::uint32_t batch_size = 256;
    std::uint32_t epochs = 50;
    double learning_rate = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Class probabilities for a batch; each row is a softmax distribution.
Matrix forward(const LayeredParams& params, const ModelSpec& spec,
               const Matrix& batch);

/// Fraction of rows whose argmax matches the label; argmax ties break toward
/// the lowest class index.
double accuracy(const LayeredParams& params, const ModelSpec& spec, const Matrix& X,
                std::span<const std::int32_t> y);

struct LossGrad {
    double loss = 0.0;
    LayeredParams grad;
};

/// Mean cross-entropy over the batch and its gradient. Throws NumericError
/// naming the layer if an intermediate goes non-finite.
LossGrad loss_and_gradient(const LayeredParams& params, const ModelSpec& spec,
                           const Matrix& X, std::span<const std::int32_t> y);

/// Uniform Glorot init for weights, zero biases. Draw order is layer-major,
/// row-major within each weight matrix.
LayeredParams glorot_init(const ModelSpec& spec, Rng& rng);

/// Full-batch-shuffled minibatch Adam. Pure function of (spec, dataset, cfg):
/// init and batch order come from streams named "weight-init" and
/// "batch-order" derived from cfg.seed. Returns the final-epoch parameters.
LayeredParams train(const ModelSpec& spec, const Dataset& dataset,
                    const TrainConfig& cfg);

struct TrainMetrics {
    LayeredParams params;
    double final_loss = 0.0;  // mean batch loss of the last epoch (0 if epochs=0)
};

/// As train(), also reporting the last epoch's mean batch loss.
TrainMetrics train_with_metrics(const ModelSpec& spec, const Dataset& dataset,
                                const TrainConfig& cfg);

}  // namespace mega
