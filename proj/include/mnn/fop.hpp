#pragma once

// Forward-only gradient propagation.
//
// The state Jacobian D_n(i, j, o) = dS_n[o] / dA(i, j) obeys
//
//   D_n(i, j, o) = phi'(T_n[o]) * ( sum_k D_{n-1}(i, j, k) A(k, o) + [o == j] S_{n-1}[i] )
//
// with D_0 = 0, so it can be advanced in the same loop as the state itself
// and only the current tensor has to be kept. The error gradient is the
// contraction of the final tensor's output slices with dE/dy.
//
// Cost per sample is O(t * M * N^2) for M unmasked connections (O(t N^4)
// dense) and O(N^3) memory.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "network.hpp"

namespace mnn {

/// Live/peak byte counters for gradient tensor storage.
struct TensorMemoryStats {
    static inline std::atomic<std::size_t> live_bytes{0};
    static inline std::atomic<std::size_t> peak_bytes{0};
    static inline std::atomic<std::size_t> allocations{0};

    static void reset_peak() noexcept { peak_bytes = live_bytes.load(); allocations = 0; }
};

template <typename T>
struct CountingAllocator {
    using value_type = T;

    CountingAllocator() = default;
    template <typename U>
    CountingAllocator(const CountingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        const std::size_t bytes = n * sizeof(T);
        const std::size_t live = TensorMemoryStats::live_bytes.fetch_add(bytes) + bytes;
        std::size_t peak = TensorMemoryStats::peak_bytes.load();
        while (live > peak && !TensorMemoryStats::peak_bytes.compare_exchange_weak(peak, live)) {
        }
        ++TensorMemoryStats::allocations;
        return std::allocator<T>{}.allocate(n);
    }
    void deallocate(T* p, std::size_t n) noexcept {
        TensorMemoryStats::live_bytes.fetch_sub(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }

    template <typename U>
    bool operator==(const CountingAllocator<U>&) const noexcept { return true; }
};

/// Rank-3 tensor D(i, j, o) = dS[o] / dA(i, j), stored as an (N*N) x N
/// row-major block so that D(i, j, .) is contiguous.
class GradientTensor {
public:
    GradientTensor() = default;
    explicit GradientTensor(std::size_t n, std::size_t tick = 0) : n_(n), tick_(tick), data_(n * n * n, 0.0) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t tick() const noexcept { return tick_; }
    void set_tick(std::size_t t) noexcept { tick_ = t; }

    double& operator()(std::size_t i, std::size_t j, std::size_t o) noexcept { return data_[(i * n_ + j) * n_ + o]; }
    double operator()(std::size_t i, std::size_t j, std::size_t o) const noexcept {
        return data_[(i * n_ + j) * n_ + o];
    }

    std::span<double> slice(std::size_t i, std::size_t j) noexcept { return {data_.data() + (i * n_ + j) * n_, n_}; }
    std::span<const double> slice(std::size_t i, std::size_t j) const noexcept {
        return {data_.data() + (i * n_ + j) * n_, n_};
    }

    std::span<const double> flat() const noexcept { return data_; }
    void zero() noexcept { std::fill(data_.begin(), data_.end(), 0.0); }

    [[nodiscard]] bool all_zero() const noexcept {
        for (double v : data_)
            if (v != 0.0) return false;
        return true;
    }

private:
    std::size_t n_ = 0;
    std::size_t tick_ = 0;
    std::vector<double, CountingAllocator<double>> data_;
};

/// result(i, j, o) = sum_k D(i, j, k) A(k, o): the (N^2 x N) flattening of D
/// times A.
inline GradientTensor contract(const GradientTensor& d, const RealMatrix& a) {
    const std::size_t n = d.size();
    detail::require_dims(a.rows() == n && a.cols() == n, "contract: matrix does not match tensor size");
    GradientTensor out(n, d.tick());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto src = d.slice(i, j);
            auto dst = out.slice(i, j);
            for (std::size_t k = 0; k < n; ++k) {
                const double v = src[k];
                if (v == 0.0) continue;
                const auto row = a.row(k);
                for (std::size_t o = 0; o < n; ++o) dst[o] += v * row[o];
            }
        }
    }
    return out;
}

namespace detail {

/// Advances `prev` (tick n-1) into `next` (tick n). Only unmasked (i, j)
/// slices are written; masked slices of `next` must already be zero.
/// Input-neuron columns of A are structurally zero, so D(., ., o) vanishes for
/// o < I and the inner sums can start at the first hidden neuron.
inline void fop_advance(const Model& model, std::span<const double> prev_state, std::span<const double> deriv,
                        const GradientTensor& prev, bool prev_is_zero, GradientTensor& next) {
    const std::size_t n = model.size();
    const std::size_t first = model.shape().inputs();
    const auto& a = model.weights();
    for (const auto [i, j] : model.connections()) {
        auto dst = next.slice(i, j);
        std::fill(dst.begin() + static_cast<std::ptrdiff_t>(first), dst.end(), 0.0);
        if (!prev_is_zero) {
            const auto src = prev.slice(i, j);
            for (std::size_t k = first; k < n; ++k) {
                const double v = src[k];
                if (v == 0.0) continue;
                const auto row = a.row(k);
                for (std::size_t o = first; o < n; ++o) dst[o] += v * row[o];
            }
        }
        dst[j] += prev_state[i];
        for (std::size_t o = first; o < n; ++o) dst[o] *= deriv[o];
    }
}

inline void check_finite(const GradientTensor& d) {
    for (double v : d.flat())
        if (!std::isfinite(v)) throw NumericError("state gradient became non-finite");
}

}  // namespace detail

/// One gradient tick. `preact` is T_n = S_{n-1} A; `prev` is D_{n-1}.
/// Slices of masked connections are left at zero and input-neuron slices
/// (o < I) are zero.
inline GradientTensor fop_step(const Model& model, std::span<const double> prev_state,
                               std::span<const double> preact, const GradientTensor& prev) {
    const std::size_t n = model.size();
    detail::require_dims(prev_state.size() == n && preact.size() == n && prev.size() == n,
                         "fop_step: operand sizes do not match network size");
    Vector deriv(n);
    const auto& acts = model.activations();
    for (std::size_t o = 0; o < n; ++o) deriv[o] = activate(acts[o], preact[o]).second;
    GradientTensor next(n, prev.tick() + 1);
    detail::fop_advance(model, prev_state, deriv, prev, prev.all_zero(), next);
    detail::check_finite(next);
    return next;
}

/// Reusable state for repeated forward-with-gradient evaluations of one
/// model. Holds exactly two tensors: the current one and the one being built.
class FopEngine {
public:
    explicit FopEngine(const Model& model)
        : model_(&model),
          n_(model.size()),
          current_(n_),
          scratch_(n_),
          state_(n_),
          next_state_(n_),
          preact_(n_),
          deriv_(n_) {}

    /// Runs all ticks for `x`; afterwards state() holds S_{t-1} and
    /// gradient() holds D_{t-1}.
    void run(std::span<const double> x) {
        const auto& shape = model_->shape();
        const Vector clamp = clamp_values(shape, x);
        state_ = initial_state(shape, x);
        current_.set_tick(0);
        if (shape.ticks() == 1) current_.zero();
        bool zero = true;
        for (std::size_t tick = 1; tick < shape.ticks(); ++tick) {
            detail::propagate(*model_, state_, clamp, preact_, next_state_, deriv_);
            detail::fop_advance(*model_, state_, deriv_, current_, zero, scratch_);
            scratch_.set_tick(tick);
            std::swap(current_, scratch_);
            std::swap(state_, next_state_);
            zero = false;
        }
        if (!zero) detail::check_finite(current_);
    }

    [[nodiscard]] const Vector& state() const noexcept { return state_; }
    [[nodiscard]] const GradientTensor& gradient() const noexcept { return current_; }
    [[nodiscard]] Vector outputs() const { return readout(state_, model_->shape()); }

private:
    const Model* model_;
    std::size_t n_;
    GradientTensor current_;
    GradientTensor scratch_;
    Vector state_, next_state_, preact_, deriv_;
};

struct ForwardGradResult {
    ForwardTrace trace;
    GradientTensor gradient;
};

/// State and state-gradient propagation in a single loop. The trace records
/// every state; only the latest gradient tensor is kept.
inline ForwardGradResult forward_with_grad(const Model& model, std::span<const double> x) {
    const auto& shape = model.shape();
    const std::size_t n = shape.total();
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("forward: non-finite input feature");
    ForwardGradResult r{ForwardTrace{}, GradientTensor(n)};
    r.trace.input.assign(x.begin(), x.end());
    r.trace.states.push_back(initial_state(shape, x));
    const Vector clamp = clamp_values(shape, x);
    GradientTensor scratch(n);
    Vector deriv(n);
    bool zero = true;
    for (std::size_t tick = 1; tick < shape.ticks(); ++tick) {
        Vector t(n), s(n);
        detail::propagate(model, r.trace.states.back(), clamp, t, s, deriv);
        detail::fop_advance(model, r.trace.states.back(), deriv, r.gradient, zero, scratch);
        scratch.set_tick(tick);
        std::swap(r.gradient, scratch);
        r.trace.preacts.push_back(std::move(t));
        r.trace.states.push_back(std::move(s));
        zero = false;
    }
    if (!zero) detail::check_finite(r.gradient);
    return r;
}

/// G(i, j) = sum_o dEdy[o] D(i, j, N-O+o), zero at masked positions.
inline RealMatrix error_gradient(std::span<const double> dedy, const GradientTensor& d, const Model& model) {
    const auto& shape = model.shape();
    const std::size_t n = shape.total();
    detail::require_dims(d.size() == n, "error_gradient: tensor size does not match network");
    detail::require_dims(dedy.size() == shape.outputs(), "error_gradient: dE/dy length does not match output count");
    RealMatrix g(n, n);
    const std::size_t first = shape.first_output();
    for (const auto [i, j] : model.connections()) {
        const auto s = d.slice(i, j);
        double acc = 0.0;
        for (std::size_t o = 0; o < dedy.size(); ++o) acc += dedy[o] * s[first + o];
        g(i, j) = acc;
    }
    return g;
}

/// Accumulating variant used by batch reductions: g += scale * error_gradient.
inline void accumulate_error_gradient(std::span<const double> dedy, const GradientTensor& d, const Model& model,
                                      double scale, RealMatrix& g) {
    const std::size_t first = model.shape().first_output();
    for (const auto [i, j] : model.connections()) {
        const auto s = d.slice(i, j);
        double acc = 0.0;
        for (std::size_t o = 0; o < dedy.size(); ++o) acc += dedy[o] * s[first + o];
        g(i, j) += scale * acc;
    }
}

}  // namespace mnn
