#include "mega/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mega/errors.hpp"

namespace mega {

namespace {

/// Kahan-compensated accumulator; keeps reductions identical run to run.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

// C = A * B, A: n x k, B: k x m, accumulation in fixed k order.
Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto brow = b.row(k);
            const auto crow = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

struct ForwardState {
    std::vector<Matrix> preact;      // Z per layer
    std::vector<Matrix> activation;  // A0 = input, A_l = relu(Z_l) for hidden
};

ForwardState forward_pass(const LayeredParams& params, const ModelSpec& spec,
                          const Matrix& batch, bool check_finite) {
    spec.validate();
    if (!params.matches(spec)) {
        throw ShapeError("parameters do not match the model spec");
    }
    if (batch.cols != spec.input_dim()) {
        throw ShapeError("batch has " + std::to_string(batch.cols) +
                         " features, model expects " +
                         std::to_string(spec.input_dim()));
    }

    ForwardState st;
    st.activation.push_back(batch);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto& layer = params.layers[l];
        Matrix z = matmul(st.activation.back(), layer.weights);
        for (std::size_t i = 0; i < z.rows; ++i) {
            const auto row = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) row[j] += layer.bias[j];
        }
        if (check_finite) {
            for (double v : z.data) {
                if (!std::isfinite(v)) {
                    throw NumericError("non-finite pre-activation in layer " +
                                       std::to_string(l));
                }
            }
        }
        if (l + 1 < spec.layer_count()) {
            Matrix a = z;
            for (double& v : a.data) v = v > 0.0 ? v : 0.0;
            st.activation.push_back(std::move(a));
        }
        st.preact.push_back(std::move(z));
    }
    return st;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto in = logits.row(i);
        const auto out = p.row(i);
        const double m = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            out[j] = std::exp(in[j] - m);
            sum += out[j];
        }
        for (std::size_t j = 0; j < in.size(); ++j) out[j] /= sum;
    }
    return p;
}

std::size_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = j;  // ties keep the lowest index
    }
    return best;
}

void check_labels(const ModelSpec& spec, const Matrix& X,
                  std::span<const std::int32_t> y) {
    if (X.rows == 0) throw ShapeError("empty evaluation set");
    if (y.size() != X.rows) {
        throw ShapeError("label count " + std::to_string(y.size()) +
                         " does not match row count " + std::to_string(X.rows));
    }
    for (auto label : y) {
        if (label < 0 || static_cast<std::uint32_t>(label) >= spec.num_classes()) {
            throw ShapeError("label " + std::to_string(label) +
                             " out of range for " +
                             std::to_string(spec.num_classes()) + " classes");
        }
    }
}

}  // namespace

void ModelSpec::validate() const {
    if (layer_widths.size() < 2) {
        throw ConfigError("model needs at least input and output widths");
    }
    for (auto w : layer_widths) {
        if (w == 0) throw ConfigError("layer widths must be >= 1");
    }
}

std::size_t ModelSpec::parameter_count() const {
    std::size_t count = 0;
    for (std::size_t l = 1; l < layer_widths.size(); ++l) {
        count += std::size_t(layer_widths[l - 1]) * layer_widths[l] + layer_widths[l];
    }
    return count;
}

LayeredParams LayeredParams::zeros(const ModelSpec& spec) {
    spec.validate();
    LayeredParams p;
    for (std::size_t l = 1; l < spec.layer_widths.size(); ++l) {
        p.layers.push_back({Matrix(spec.layer_widths[l - 1], spec.layer_widths[l]),
                            std::vector<double>(spec.layer_widths[l], 0.0)});
    }
    return p;
}

bool LayeredParams::matches(const ModelSpec& spec) const {
    if (layers.size() != spec.layer_count()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].weights.rows != spec.layer_widths[l] ||
            layers[l].weights.cols != spec.layer_widths[l + 1] ||
            layers[l].bias.size() != spec.layer_widths[l + 1]) {
            return false;
        }
    }
    return true;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 ||
        adam_beta2 >= 1.0) {
        throw ConfigError("adam betas must lie in (0, 1)");
    }
    if (adam_epsilon <= 0.0) throw ConfigError("adam_epsilon must be > 0");
}

Matrix forward(const LayeredParams& params, const ModelSpec& spec,
               const Matrix& batch) {
    const auto st = forward_pass(params, spec, batch, false);
    return softmax_rows(st.preact.back());
}

double accuracy(const LayeredParams& params, const ModelSpec& spec, const Matrix& X,
                std::span<const std::int32_t> y) {
    check_labels(spec, X, y);
    const Matrix probs = forward(params, spec, X);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        if (argmax_row(probs.row(i)) == static_cast<std::size_t>(y[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probs.rows);
}

LossGrad loss_and_gradient(const LayeredParams& params, const ModelSpec& spec,
                           const Matrix& X, std::span<const std::int32_t> y) {
    check_labels(spec, X, y);
    const auto st = forward_pass(params, spec, X, true);
    const Matrix& logits = st.preact.back();
    const std::size_t n = X.rows;
    const std::size_t L = spec.layer_count();

    // loss_i = logsumexp(z_i) - z_{i, y_i}; probabilities reused for the
    // gradient.
    Matrix probs(logits.rows, logits.cols);
    CompensatedSum loss;
    for (std::size_t i = 0; i < n; ++i) {
        const auto in = logits.row(i);
        const auto out = probs.row(i);
        const double m = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            out[j] = std::exp(in[j] - m);
            sum += out[j];
        }
        const double lse = m + std::log(sum);
        loss.add(lse - in[static_cast<std::size_t>(y[i])]);
        for (std::size_t j = 0; j < in.size(); ++j) out[j] /= sum;
    }

    LossGrad result;
    result.loss = loss.sum / static_cast<double>(n);
    result.grad = LayeredParams::zeros(spec);

    // dZ_L = (P - onehot(y)) / n
    Matrix dz = probs;
    for (std::size_t i = 0; i < n; ++i) {
        dz(i, static_cast<std::size_t>(y[i])) -= 1.0;
    }
    for (double& v : dz.data) v /= static_cast<double>(n);

    for (std::size_t l = L; l-- > 0;) {
        const Matrix& a_prev = st.activation[l];
        auto& grad_layer = result.grad.layers[l];
        // dW = A_prev^T * dZ
        for (std::size_t i = 0; i < a_prev.rows; ++i) {
            const auto arow = a_prev.row(i);
            const auto dzrow = dz.row(i);
            for (std::size_t r = 0; r < a_prev.cols; ++r) {
                const double av = arow[r];
                if (av == 0.0) continue;
                const auto wrow = grad_layer.weights.row(r);
                for (std::size_t j = 0; j < dz.cols; ++j) wrow[j] += av * dzrow[j];
            }
        }
        // db = column sums of dZ
        for (std::size_t i = 0; i < dz.rows; ++i) {
            const auto dzrow = dz.row(i);
            for (std::size_t j = 0; j < dz.cols; ++j) grad_layer.bias[j] += dzrow[j];
        }
        if (l == 0) break;
        // dZ_{l-1} = (dZ_l * W_l^T) ⊙ relu'(Z_{l-1})
        const Matrix& w = params.layers[l].weights;
        Matrix dprev(dz.rows, w.rows);
        for (std::size_t i = 0; i < dz.rows; ++i) {
            const auto dzrow = dz.row(i);
            const auto drow = dprev.row(i);
            for (std::size_t r = 0; r < w.rows; ++r) {
                const auto wrow = w.row(r);
                double acc = 0.0;
                for (std::size_t j = 0; j < w.cols; ++j) acc += dzrow[j] * wrow[j];
                drow[r] = acc;
            }
        }
        const Matrix& z_prev = st.preact[l - 1];
        for (std::size_t i = 0; i < dprev.data.size(); ++i) {
            if (z_prev.data[i] <= 0.0) dprev.data[i] = 0.0;
        }
        dz = std::move(dprev);
    }
    return result;
}

LayeredParams glorot_init(const ModelSpec& spec, Rng& rng) {
    LayeredParams p = LayeredParams::zeros(spec);
    for (auto& layer : p.layers) {
        const double limit =
            std::sqrt(6.0 / double(layer.weights.rows + layer.weights.cols));
        for (double& w : layer.weights.data) {
            w = limit * (2.0 * rng.uniform() - 1.0);
        }
    }
    return p;
}

namespace {

struct AdamState {
    LayeredParams m;
    LayeredParams v;
    std::uint64_t step = 0;

    explicit AdamState(const ModelSpec& spec)
        : m(LayeredParams::zeros(spec)), v(LayeredParams::zeros(spec)) {}

    void update(LayeredParams& params, const LayeredParams& grad,
                const TrainConfig& cfg) {
        ++step;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            auto apply = [&](double& p, double& mm, double& vv, double g) {
                mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * g;
                vv = cfg.adam_beta2 * vv + (1.0 - cfg.adam_beta2) * g * g;
                p -= cfg.learning_rate * (mm / c1) /
                     (std::sqrt(vv / c2) + cfg.adam_epsilon);
            };
            auto& pl = params.layers[l];
            const auto& gl = grad.layers[l];
            for (std::size_t i = 0; i < pl.weights.data.size(); ++i) {
                apply(pl.weights.data[i], m.layers[l].weights.data[i],
                      v.layers[l].weights.data[i], gl.weights.data[i]);
            }
            for (std::size_t i = 0; i < pl.bias.size(); ++i) {
                apply(pl.bias[i], m.layers[l].bias[i], v.layers[l].bias[i],
                      gl.bias[i]);
            }
        }
    }
};

}  // namespace

TrainMetrics train_with_metrics(const ModelSpec& spec, const Dataset& dataset,
                                const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (dataset.partition.train.empty()) {
        throw DataError("dataset has no training partition (run split first)");
    }
    if (dataset.dim() != spec.input_dim()) {
        throw ShapeError("dataset has " + std::to_string(dataset.dim()) +
                         " features, model expects " +
                         std::to_string(spec.input_dim()));
    }

    Rng init_rng(seed_stream(cfg.seed, "weight-init"));
    TrainMetrics out{glorot_init(spec, init_rng), 0.0};
    if (cfg.epochs == 0) return out;

    auto [X_train, y_train] = subset(dataset, dataset.partition.train);
    const std::size_t m = X_train.rows;

    Rng order_rng(seed_stream(cfg.seed, "batch-order"));
    std::vector<std::uint32_t> order(m);
    std::iota(order.begin(), order.end(), 0u);

    AdamState adam(spec);
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order_rng, order);
        CompensatedSum epoch_loss;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < m; start += cfg.batch_size) {
            const std::size_t len = std::min<std::size_t>(cfg.batch_size, m - start);
            Matrix bx(len, X_train.cols);
            std::vector<std::int32_t> by(len);
            for (std::size_t i = 0; i < len; ++i) {
                const auto src = X_train.row(order[start + i]);
                std::copy(src.begin(), src.end(), bx.row(i).begin());
                by[i] = y_train[order[start + i]];
            }
            LossGrad lg;
            try {
                lg = loss_and_gradient(out.params, spec, bx, by);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " +
                                   std::to_string(epoch) + ": " + e.what());
            }
            if (!std::isfinite(lg.loss)) {
                throw NumericError("training diverged at epoch " +
                                   std::to_string(epoch));
            }
            adam.update(out.params, lg.grad, cfg);
            epoch_loss.add(lg.loss);
            ++batches;
        }
        out.final_loss = epoch_loss.sum / static_cast<double>(batches);
    }
    return out;
}

LayeredParams train(const ModelSpec& spec, const Dataset& dataset,
                    const TrainConfig& cfg) {
    return train_with_metrics(spec, dataset, cfg).params;
}

}  // namespace mega
