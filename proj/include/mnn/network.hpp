#pragma once

// Mesh network data model and forward state propagation.
//
// A network of N neurons is a single N x N adjacency matrix A where A(i, j)
// is the weight from neuron i to neuron j. Neurons are ordered inputs first,
// then hidden, then outputs; the last input neuron is the bias. One tick maps
// a state row vector S to phi(S A).

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace mnn {

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { relu, tanh, sigmoid, identity };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "?";
}

inline Activation parse_activation(std::string_view tag) {
    if (tag == "relu") return Activation::relu;
    if (tag == "tanh") return Activation::tanh;
    if (tag == "sigmoid") return Activation::sigmoid;
    if (tag == "identity") return Activation::identity;
    throw Error("unknown activation '" + std::string(tag) + "'");
}

/// Value and derivative at x. relu'(0) is 0.
inline std::pair<double, double> activate(Activation a, double x) noexcept {
    switch (a) {
        case Activation::relu: return x > 0.0 ? std::pair{x, 1.0} : std::pair{0.0, 0.0};
        case Activation::tanh: {
            const double y = std::tanh(x);
            return {y, 1.0 - y * y};
        }
        case Activation::sigmoid: {
            const double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            return {y, y * (1.0 - y)};
        }
        case Activation::identity: return {x, 1.0};
    }
    return {x, 1.0};
}

struct ActivationResult {
    Vector value;
    Vector derivative;
};

/// Element-wise value and derivative in one pass.
inline ActivationResult activation_eval(Activation a, std::span<const double> x) {
    ActivationResult r{Vector(x.size()), Vector(x.size())};
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::tie(r.value[i], r.derivative[i]) = activate(a, x[i]);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Shape
// ---------------------------------------------------------------------------

/// Neuron counts and tick count. `inputs` includes the bias neuron. `ticks`
/// counts states including S_0, so a network runs ticks - 1 propagation steps.
class NetworkShape {
public:
    NetworkShape(std::size_t inputs, std::size_t hidden, std::size_t outputs, std::size_t ticks)
        : inputs_(inputs), hidden_(hidden), outputs_(outputs), ticks_(ticks) {
        if (inputs < 2) throw ShapeError("network needs at least 2 input neurons (one feature plus bias)");
        if (outputs < 1) throw ShapeError("network needs at least one output neuron");
        if (ticks < 1) throw ShapeError("tick count must be positive");
    }

    [[nodiscard]] std::size_t inputs() const noexcept { return inputs_; }
    [[nodiscard]] std::size_t hidden() const noexcept { return hidden_; }
    [[nodiscard]] std::size_t outputs() const noexcept { return outputs_; }
    [[nodiscard]] std::size_t ticks() const noexcept { return ticks_; }
    [[nodiscard]] std::size_t total() const noexcept { return inputs_ + hidden_ + outputs_; }
    [[nodiscard]] std::size_t features() const noexcept { return inputs_ - 1; }
    [[nodiscard]] std::size_t bias_index() const noexcept { return inputs_ - 1; }
    [[nodiscard]] std::size_t first_hidden() const noexcept { return inputs_; }
    [[nodiscard]] std::size_t first_output() const noexcept { return inputs_ + hidden_; }

    NetworkShape with_ticks(std::size_t t) const { return {inputs_, hidden_, outputs_, t}; }

    friend bool operator==(const NetworkShape&, const NetworkShape&) = default;

private:
    std::size_t inputs_;
    std::size_t hidden_;
    std::size_t outputs_;
    std::size_t ticks_;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Connection {
    std::size_t from;
    std::size_t to;
};

/// Adjacency weights, connection mask and per-neuron activations.
///
/// Invariants: masked-out weights are exactly zero, no connection enters an
/// input neuron, all weights are finite.
class Model {
public:
    Model(NetworkShape shape, Mask mask, RealMatrix weights, std::vector<Activation> activations,
          bool clamp_inputs = true)
        : shape_(shape),
          mask_(std::move(mask)),
          weights_(std::move(weights)),
          activations_(std::move(activations)),
          clamp_(clamp_inputs) {
        const std::size_t n = shape_.total();
        if (mask_.rows() != n || mask_.cols() != n)
            throw DimensionError("mask must be " + std::to_string(n) + "x" + std::to_string(n));
        if (weights_.rows() != n || weights_.cols() != n)
            throw DimensionError("weight matrix must be " + std::to_string(n) + "x" + std::to_string(n));
        if (activations_.size() != n) throw DimensionError("need one activation per neuron");
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const auto at = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
                if (mask_(i, j) > 1) throw ShapeError("mask entry " + at + " is not 0/1");
                if (j < shape_.inputs() && mask_(i, j))
                    throw ShapeError("mask connects into input neuron at " + at);
                if (!std::isfinite(weights_(i, j))) throw NumericError("non-finite weight at " + at);
                if (!mask_(i, j) && weights_(i, j) != 0.0)
                    throw ShapeError("nonzero weight at masked position " + at);
                if (mask_(i, j)) connections_.push_back({i, j});
            }
        }
    }

    Model(NetworkShape shape, Mask mask, RealMatrix weights, Activation activation, bool clamp_inputs = true)
        : Model(shape, std::move(mask), std::move(weights), std::vector<Activation>(shape.total(), activation),
                clamp_inputs) {}

    [[nodiscard]] const NetworkShape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return shape_.total(); }
    [[nodiscard]] const Mask& mask() const noexcept { return mask_; }
    [[nodiscard]] const RealMatrix& weights() const noexcept { return weights_; }
    [[nodiscard]] const std::vector<Activation>& activations() const noexcept { return activations_; }
    [[nodiscard]] bool clamps_inputs() const noexcept { return clamp_; }
    /// Unmasked (from, to) pairs in row-major order.
    [[nodiscard]] const std::vector<Connection>& connections() const noexcept { return connections_; }

    [[nodiscard]] bool uniform_activation() const noexcept {
        for (auto a : activations_)
            if (a != activations_.front()) return false;
        return true;
    }

    void set_clamping(bool on) noexcept { clamp_ = on; }

    /// Throws if (i, j) is masked and value is nonzero, or value is not finite.
    void set_weight(std::size_t i, std::size_t j, double value) {
        const auto at = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        if (!std::isfinite(value)) throw NumericError("non-finite weight update at " + at);
        if (!mask_(i, j) && value != 0.0) throw ShapeError("cannot set weight at masked position " + at);
        weights_(i, j) = value;
    }

    friend bool operator==(const Model&, const Model&) = default;

private:
    NetworkShape shape_;
    Mask mask_;
    RealMatrix weights_;
    std::vector<Activation> activations_;
    bool clamp_;
    std::vector<Connection> connections_;
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

enum class Init { zero, uniform_scaled };

/// Weights are i.i.d. uniform on (-sqrt(6/N), sqrt(6/N)) at unmasked
/// positions. Bit-identical for equal arguments.
inline Model build_model(const NetworkShape& shape, const Mask& mask, Init init, std::uint64_t seed,
                         Activation activation = Activation::relu, bool clamp_inputs = true) {
    const std::size_t n = shape.total();
    detail::require_dims(mask.rows() == n && mask.cols() == n, "build_model: mask size does not match shape");
    RealMatrix w(n, n);
    if (init == Init::uniform_scaled) {
        const double bound = std::sqrt(6.0 / static_cast<double>(n));
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (mask(i, j)) w(i, j) = dist(rng);
    }
    return Model(shape, mask, std::move(w), activation, clamp_inputs);
}

/// Default mesh topology: inputs feed hidden and outputs, hidden neurons are
/// fully interconnected without self loops and feed outputs, outputs feed
/// back into hidden.
inline Mask mesh_mask(const NetworkShape& shape) {
    const std::size_t n = shape.total();
    const std::size_t h0 = shape.first_hidden();
    const std::size_t o0 = shape.first_output();
    Mask m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = h0; j < n; ++j) {
            const bool from_input = i < h0;
            const bool from_hidden = i >= h0 && i < o0;
            const bool to_hidden = j < o0;
            if (from_input || (from_hidden && i != j) || (!from_input && !from_hidden && to_hidden)) m(i, j) = 1;
        }
    }
    return m;
}

/// Every connection that does not enter an input neuron, self loops included.
inline Mask full_mask(const NetworkShape& shape) {
    const std::size_t n = shape.total();
    Mask m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = shape.inputs(); j < n; ++j) m(i, j) = 1;
    return m;
}

/// Embeds a stack of layer matrices as the block adjacency matrix of an MLP.
/// Layer l's units occupy a contiguous index range right after layer l-1.
/// Input clamping is off so the layer-by-layer evaluation is reproduced.
inline Model from_mlp_layers(const std::vector<RealMatrix>& blocks, Activation activation = Activation::identity) {
    if (blocks.empty()) throw DimensionError("from_mlp_layers: empty layer list");
    for (std::size_t l = 0; l + 1 < blocks.size(); ++l) {
        if (blocks[l].cols() != blocks[l + 1].rows())
            throw DimensionError("from_mlp_layers: layer " + std::to_string(l) + " has " +
                                 std::to_string(blocks[l].cols()) + " outputs but layer " + std::to_string(l + 1) +
                                 " expects " + std::to_string(blocks[l + 1].rows()) + " inputs");
    }
    std::size_t n = blocks.front().rows();
    for (const auto& b : blocks) n += b.cols();
    const std::size_t in = blocks.front().rows();
    const std::size_t out = blocks.back().cols();
    NetworkShape shape(in, n - in - out, out, blocks.size() + 1);

    Mask mask(n, n);
    RealMatrix w(n, n);
    std::size_t row0 = 0;
    for (const auto& b : blocks) {
        const std::size_t col0 = row0 + b.rows();
        for (std::size_t i = 0; i < b.rows(); ++i) {
            for (std::size_t j = 0; j < b.cols(); ++j) {
                mask(row0 + i, col0 + j) = 1;
                w(row0 + i, col0 + j) = b(i, j);
            }
        }
        row0 = col0;
    }
    return Model(shape, std::move(mask), std::move(w), activation, false);
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

/// Input-neuron values for a feature vector: (x, 1).
inline Vector clamp_values(const NetworkShape& shape, std::span<const double> x) {
    detail::require_dims(x.size() == shape.features(), "expected " + std::to_string(shape.features()) +
                                                           " input features, got " + std::to_string(x.size()));
    Vector v(x.begin(), x.end());
    v.push_back(1.0);
    return v;
}

/// S_0: features, bias 1, zeros elsewhere.
inline Vector initial_state(const NetworkShape& shape, std::span<const double> x) {
    Vector s = clamp_values(shape, x);
    s.resize(shape.total(), 0.0);
    return s;
}

namespace detail {

/// T = S A, next = phi(T), deriv = phi'(T); clamps input neurons if enabled.
inline void propagate(const Model& model, std::span<const double> state, std::span<const double> clamp,
                      std::span<double> preact, std::span<double> next, std::span<double> deriv) {
    const auto& a = model.weights();
    const std::size_t n = model.size();
    std::fill(preact.begin(), preact.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double sk = state[k];
        if (sk == 0.0) continue;
        const auto row = a.row(k);
        for (std::size_t o = 0; o < n; ++o) preact[o] += sk * row[o];
    }
    const auto& acts = model.activations();
    for (std::size_t o = 0; o < n; ++o) {
        std::tie(next[o], deriv[o]) = activate(acts[o], preact[o]);
        if (!std::isfinite(next[o]))
            throw NumericError("numeric overflow: state of neuron " + std::to_string(o) + " is not finite");
    }
    if (model.clamps_inputs()) {
        for (std::size_t i = 0; i < clamp.size(); ++i) {
            next[i] = clamp[i];
            deriv[i] = 0.0;
        }
    }
}

}  // namespace detail

struct StepResult {
    Vector preact;
    Vector state;
};

/// One tick. `x` holds the features only; the bias is appended.
inline StepResult step(const Model& model, std::span<const double> state, std::span<const double> x) {
    const std::size_t n = model.size();
    detail::require_dims(state.size() == n, "step: state length " + std::to_string(state.size()) +
                                                " does not match network size " + std::to_string(n));
    const Vector clamp = clamp_values(model.shape(), x);
    StepResult r{Vector(n), Vector(n)};
    Vector deriv(n);
    detail::propagate(model, state, clamp, r.preact, r.state, deriv);
    return r;
}

/// States S_0..S_{t-1} and pre-activations T_1..T_{t-1} of one evaluation.
struct ForwardTrace {
    Vector input;
    std::vector<Vector> states;
    std::vector<Vector> preacts;

    [[nodiscard]] const Vector& final_state() const { return states.back(); }
};

inline ForwardTrace forward(const Model& model, std::span<const double> x) {
    const auto& shape = model.shape();
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("forward: non-finite input feature");
    ForwardTrace trace;
    trace.input.assign(x.begin(), x.end());
    trace.states.reserve(shape.ticks());
    trace.states.push_back(initial_state(shape, x));
    const Vector clamp = clamp_values(shape, x);
    const std::size_t n = shape.total();
    Vector deriv(n);
    for (std::size_t tick = 1; tick < shape.ticks(); ++tick) {
        Vector t(n), s(n);
        detail::propagate(model, trace.states.back(), clamp, t, s, deriv);
        trace.preacts.push_back(std::move(t));
        trace.states.push_back(std::move(s));
    }
    return trace;
}

/// Output neuron states of the last tick.
inline Vector readout(std::span<const double> final_state, const NetworkShape& shape) {
    detail::require_dims(final_state.size() == shape.total(), "readout: state length does not match shape");
    const auto first = final_state.begin() + static_cast<std::ptrdiff_t>(shape.first_output());
    return Vector(first, final_state.end());
}

inline Vector readout(const ForwardTrace& trace, const NetworkShape& shape) {
    if (trace.states.size() != shape.ticks())
        throw DimensionError("readout: trace has " + std::to_string(trace.states.size()) + " states, expected " +
                             std::to_string(shape.ticks()));
    return readout(trace.final_state(), shape);
}

/// Forward pass without keeping the trace.
inline Vector predict_outputs(const Model& model, std::span<const double> x) {
    const auto& shape = model.shape();
    const std::size_t n = shape.total();
    const Vector clamp = clamp_values(shape, x);
    Vector s = initial_state(shape, x), t(n), next(n), deriv(n);
    for (std::size_t tick = 1; tick < shape.ticks(); ++tick) {
        detail::propagate(model, s, clamp, t, next, deriv);
        std::swap(s, next);
    }
    return readout(s, shape);
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace mnn
