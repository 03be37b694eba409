#pragma once

// Softmax cross-entropy head, optimizers and the full-batch training loop.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "fop.hpp"
#include "matrix.hpp"
#include "network.hpp"

namespace mnn {

struct LossResult {
    double loss;
    Vector dedy;
    Vector probs;
};

/// p = softmax(y) with max subtraction, loss = -log p[label], dE/dy = p - onehot.
inline LossResult softmax_cross_entropy(std::span<const double> y, std::size_t label) {
    if (label >= y.size())
        throw DimensionError("label " + std::to_string(label) + " out of range for " + std::to_string(y.size()) +
                             " outputs");
    double m = y[0];
    for (double v : y) m = std::max(m, v);
    LossResult r{0.0, Vector(y.size()), Vector(y.size())};
    double sum = 0.0;
    for (std::size_t o = 0; o < y.size(); ++o) {
        r.probs[o] = std::exp(y[o] - m);
        sum += r.probs[o];
    }
    for (std::size_t o = 0; o < y.size(); ++o) {
        r.probs[o] /= sum;
        r.dedy[o] = r.probs[o] - (o == label ? 1.0 : 0.0);
    }
    // log-sum-exp form keeps the loss exact when p[label] underflows
    r.loss = std::log(sum) - (y[label] - m);
    if (r.loss < 0.0) r.loss = 0.0;
    return r;
}

enum class Optimizer { adam, sgd };

inline std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

inline Optimizer parse_optimizer(std::string_view tag) {
    if (tag == "adam") return Optimizer::adam;
    if (tag == "sgd") return Optimizer::sgd;
    throw Error("unknown optimizer '" + std::string(tag) + "'");
}

struct TrainConfig {
    std::size_t epochs = 1000;
    double learning_rate = 0.001;
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    bool clamping = true;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error("learning rate must be positive");
        if (!(beta1 > 0.0 && beta1 < 1.0)) throw Error("beta1 must lie in (0, 1)");
        if (!(beta2 > 0.0 && beta2 < 1.0)) throw Error("beta2 must lie in (0, 1)");
        if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
    }
};

struct EpochMetrics {
    std::size_t epoch;
    double loss;
    double accuracy;
};

using Metrics = std::vector<EpochMetrics>;

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

struct BatchGradient {
    double loss = 0.0;
    RealMatrix gradient;
    double accuracy = 0.0;
};

namespace detail {

inline void require_features(const Model& model, const LabeledDataset& data) {
    if (data.empty()) throw DimensionError("empty batch");
    if (data.feature_count() != model.shape().features())
        throw DimensionError("dataset has " + std::to_string(data.feature_count()) + " features, network expects " +
                             std::to_string(model.shape().features()));
    for (auto l : data.labels)
        if (l >= model.shape().outputs())
            throw DimensionError("label " + std::to_string(l) + " has no output neuron");
}

}  // namespace detail

/// Mean loss and mean error gradient over the batch, summed in dataset order.
/// Also reports the accuracy of the same forward passes.
inline BatchGradient batch_gradient(const Model& model, const LabeledDataset& batch) {
    detail::require_features(model, batch);
    const std::size_t n = model.size();
    BatchGradient r{0.0, RealMatrix(n, n), 0.0};
    FopEngine engine(model);
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::size_t correct = 0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        engine.run(batch.sample(k));
        const Vector y = engine.outputs();
        const auto head = softmax_cross_entropy(y, batch.labels[k]);
        if (!std::isfinite(head.loss)) throw NumericError("non-finite loss at sample " + std::to_string(k));
        r.loss += head.loss;
        if (argmax(y) == batch.labels[k]) ++correct;
        accumulate_error_gradient(head.dedy, engine.gradient(), model, scale, r.gradient);
    }
    r.loss *= scale;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(batch.size());
    return r;
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

/// A <- A - lr * G on unmasked entries.
inline void sgd_step(Model& model, const RealMatrix& g, double lr) {
    detail::require_dims(g.rows() == model.size() && g.cols() == model.size(), "sgd_step: gradient size mismatch");
    for (const auto [i, j] : model.connections()) {
        const double delta = lr * g(i, j);
        if (delta != 0.0) model.set_weight(i, j, model.weights()(i, j) - delta);
    }
}

struct AdamState {
    RealMatrix m;
    RealMatrix v;
    std::size_t step = 0;

    explicit AdamState(std::size_t n) : m(n, n), v(n, n) {}
};

/// Bias-corrected Adam update on unmasked entries.
inline void adam_step(AdamState& state, Model& model, const RealMatrix& g, const TrainConfig& cfg) {
    const std::size_t n = model.size();
    detail::require_dims(g.rows() == n && g.cols() == n, "adam_step: gradient size mismatch");
    detail::require_dims(state.m.rows() == n && state.m.cols() == n, "adam_step: state size mismatch");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (const auto [i, j] : model.connections()) {
        const double gij = g(i, j);
        double& m = state.m(i, j);
        double& v = state.v(i, j);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * gij;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * gij * gij;
        const double update = cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
        if (update != 0.0) model.set_weight(i, j, model.weights()(i, j) - update);
    }
}

// ---------------------------------------------------------------------------
// Loop
// ---------------------------------------------------------------------------

/// Fraction of samples whose argmax output matches the label.
inline double evaluate(const Model& model, const LabeledDataset& data) {
    detail::require_features(model, data);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < data.size(); ++k)
        if (argmax(predict_outputs(model, data.sample(k))) == data.labels[k]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct LossAndAccuracy {
    double loss;
    double accuracy;
};

inline LossAndAccuracy loss_and_accuracy(const Model& model, const LabeledDataset& data) {
    detail::require_features(model, data);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const Vector y = predict_outputs(model, data.sample(k));
        loss += softmax_cross_entropy(y, data.labels[k]).loss;
        if (argmax(y) == data.labels[k]) ++correct;
    }
    const double n = static_cast<double>(data.size());
    return {loss / n, static_cast<double>(correct) / n};
}

struct TrainResult {
    Model model;
    Metrics metrics;
};

/// Full-batch training. Row e of the metrics holds loss and accuracy of the
/// model after e optimizer steps (e = 1..epochs).
inline TrainResult train(Model model, const LabeledDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    detail::require_features(model, data);
    model.set_clamping(cfg.clamping);
    TrainResult r{std::move(model), {}};
    if (cfg.epochs == 0) return r;
    r.metrics.reserve(cfg.epochs);
    AdamState adam(r.model.size());
    auto grad = batch_gradient(r.model, data);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (!std::isfinite(grad.loss)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
        if (cfg.optimizer == Optimizer::adam)
            adam_step(adam, r.model, grad.gradient, cfg);
        else
            sgd_step(r.model, grad.gradient, cfg.learning_rate);
        LossAndAccuracy after{};
        if (epoch < cfg.epochs) {
            grad = batch_gradient(r.model, data);
            after = {grad.loss, grad.accuracy};
        } else {
            after = loss_and_accuracy(r.model, data);
        }
        if (!std::isfinite(after.loss))
            throw NumericError("training diverged: non-finite loss after epoch " + std::to_string(epoch));
        r.metrics.push_back({epoch, after.loss, after.accuracy});
    }
    return r;
}

/// "epoch,loss,accuracy" with 17 significant digits.
inline void write_metrics_csv(std::ostream& out, const Metrics& metrics) {
    out << "epoch,loss,accuracy\n";
    char buf[80];
    for (const auto& m : metrics) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", m.epoch, m.loss, m.accuracy);
        out << buf;
    }
}

inline void save_metrics_csv(const std::filesystem::path& path, const Metrics& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write metrics file '" + path.string() + "'");
    write_metrics_csv(out, metrics);
}

}  // namespace mnn
