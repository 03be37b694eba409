#pragma once

// Central finite-difference oracle for the error gradient. It only uses the
// plain forward pass and the loss head, never the gradient propagation code.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <sstream>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "matrix.hpp"
#include "network.hpp"
#include "training.hpp"

namespace mnn {

/// Scalar loss of the network outputs.
using OutputLoss = std::function<double(std::span<const double>)>;

/// (E(A + h e_ij) - E(A - h e_ij)) / 2h for every unmasked (i, j).
inline RealMatrix finite_diff_gradient(const Model& model, std::span<const double> x, const OutputLoss& loss,
                                       double h = 1e-6) {
    if (!(h > 0.0)) throw Error("finite difference step must be positive");
    const std::size_t n = model.size();
    RealMatrix g(n, n);
    Model probe = model;
    auto eval = [&](double w, std::size_t i, std::size_t j) {
        probe.set_weight(i, j, w);
        const double e = loss(predict_outputs(probe, x));
        if (!std::isfinite(e))
            throw NumericError("non-finite loss at perturbed weight (" + std::to_string(i) + "," +
                               std::to_string(j) + ")");
        return e;
    };
    for (const auto [i, j] : model.connections()) {
        const double w = model.weights()(i, j);
        const double plus = eval(w + h, i, j);
        const double minus = eval(w - h, i, j);
        probe.set_weight(i, j, w);
        g(i, j) = (plus - minus) / (2.0 * h);
    }
    return g;
}

/// Softmax cross-entropy against `label`.
inline RealMatrix finite_diff_gradient(const Model& model, std::span<const double> x, std::size_t label,
                                       double h = 1e-6) {
    return finite_diff_gradient(
        model, x, [label](std::span<const double> y) { return softmax_cross_entropy(y, label).loss; }, h);
}

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
    double tolerance = 0.0;
    bool pass = true;
};

/// Per-entry |a - b| / max(|a|, |b|, 1e-8); passes iff the maximum <= tol.
inline GradCheckReport compare(const RealMatrix& g, const RealMatrix& g_fd, double rel_tol) {
    detail::require_dims(g.rows() == g_fd.rows() && g.cols() == g_fd.cols(), "compare: matrix sizes differ");
    GradCheckReport r;
    r.tolerance = rel_tol;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            const double a = g(i, j), b = g_fd(i, j);
            const double err = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
            if (err > r.max_rel_err) {
                r.max_rel_err = err;
                r.worst_row = i;
                r.worst_col = j;
            }
        }
    }
    r.pass = r.max_rel_err <= rel_tol;
    return r;
}

inline std::string to_text(const GradCheckReport& r) {
    std::ostringstream s;
    s.precision(6);
    s << (r.pass ? "PASS" : "FAIL") << "  max_rel_err=" << std::scientific << r.max_rel_err << "  worst=("
      << r.worst_row << "," << r.worst_col << ")  tol=" << r.tolerance;
    return s.str();
}

inline nlohmann::json to_json(const GradCheckReport& r) {
    return {{"max_rel_err", r.max_rel_err},
            {"worst_index", {r.worst_row, r.worst_col}},
            {"tolerance", r.tolerance},
            {"pass", r.pass}};
}

// ---------------------------------------------------------------------------
// Random check cases
// ---------------------------------------------------------------------------

struct CheckCase {
    Model model;
    Vector input;
    std::size_t label;
};

namespace detail {

inline bool away_from_kinks(const Model& model, std::span<const double> x, double margin) {
    const auto trace = forward(model, x);
    for (const auto& t : trace.preacts)
        for (std::size_t o = model.shape().inputs(); o < t.size(); ++o)
            if (std::abs(t[o]) < margin) return false;
    return true;
}

}  // namespace detail

/// Random N-neuron network with every non-input connection enabled, weights
/// uniform in (-1, 1), 2 features plus bias (1 feature for N = 3), and 1-2
/// outputs. ReLU cases are redrawn until every pre-activation is at least
/// 1e-4 away from the kink.
inline CheckCase random_check_case(std::size_t neurons, std::size_t ticks, Activation activation, std::uint64_t seed,
                                   bool clamp = true) {
    if (neurons < 3) throw ShapeError("gradient check needs at least 3 neurons");
    const std::size_t inputs = neurons >= 5 ? 3 : 2;
    const std::size_t outputs = neurons >= 4 ? 2 : 1;
    const NetworkShape shape(inputs, neurons - inputs - outputs, outputs, ticks);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, outputs - 1);
    const Mask mask = full_mask(shape);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        RealMatrix w(neurons, neurons);
        for (std::size_t i = 0; i < neurons; ++i)
            for (std::size_t j = 0; j < neurons; ++j)
                if (mask(i, j)) w(i, j) = unit(rng);
        Vector x(shape.features());
        for (double& v : x) v = unit(rng);
        CheckCase c{Model(shape, mask, std::move(w), activation, clamp), std::move(x), pick(rng)};
        if (activation != Activation::relu || detail::away_from_kinks(c.model, c.input, 1e-4)) return c;
    }
    throw Error("could not draw a ReLU check case away from kinks");
}

}  // namespace mnn
