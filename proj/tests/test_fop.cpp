#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

using namespace mnn;
using mnn::test::random_model;
using mnn::test::random_vector;
using mnn::test::rel_err;

namespace {

GradientTensor random_tensor(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GradientTensor d(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t o = 0; o < n; ++o) d(i, j, o) = u(rng);
    return d;
}

}  // namespace

TEST(Contract, HandExample) {
    GradientTensor d(2);
    d(0, 1, 0) = 1.0;
    d(0, 1, 1) = 2.0;
    RealMatrix a(2, 2);
    a(0, 1) = 3.0;
    const auto r = contract(d, a);
    EXPECT_EQ(r(0, 1, 0), 0.0);
    EXPECT_EQ(r(0, 1, 1), 3.0);
}

TEST(Contract, ZeroAndIdentity) {
    std::mt19937_64 rng(1);
    const auto d = random_tensor(5, rng);
    const auto a = test::random_matrix(5, 5, rng);
    EXPECT_TRUE(contract(GradientTensor(5), a).all_zero());
    const auto same = contract(d, RealMatrix::identity(5));
    for (std::size_t k = 0; k < 125; ++k) EXPECT_EQ(same.flat()[k], d.flat()[k]);
    EXPECT_THROW(contract(d, RealMatrix(4, 4)), DimensionError);
}

TEST(Contract, MatchesTripleLoop) {
    std::mt19937_64 rng(2);
    const std::size_t n = 6;
    const auto d = random_tensor(n, rng);
    const auto a = test::random_matrix(n, n, rng);
    const auto r = contract(d, a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t o = 0; o < n; ++o) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += d(i, j, k) * a(k, o);
                EXPECT_NEAR(r(i, j, o), s, 1e-14);
            }
}

TEST(FopStep, FirstStepClosedForm) {
    std::mt19937_64 rng(3);
    for (auto act : {Activation::tanh, Activation::sigmoid, Activation::relu}) {
        const NetworkShape shape(3, 4, 2, 2);
        const auto m = random_model(shape, mesh_mask(shape), act, rng);
        const auto x = random_vector(2, rng);
        const auto s0 = initial_state(shape, x);
        const auto st = step(m, s0, x);
        const auto d = fop_step(m, s0, st.preact, GradientTensor(shape.total()));
        EXPECT_EQ(d.tick(), 1u);
        for (std::size_t i = 0; i < shape.total(); ++i)
            for (std::size_t j = 0; j < shape.total(); ++j)
                for (std::size_t o = 0; o < shape.total(); ++o) {
                    double expected = 0.0;
                    if (m.mask()(i, j) && o == j) expected = activate(act, st.preact[o]).second * s0[i];
                    EXPECT_EQ(d(i, j, o), expected);
                }
    }
}

TEST(FopStep, SingleEdgeIdentity) {
    const double x = 0.8;
    const auto m = test::single_edge_model(-1.3, Activation::identity, false);
    const Vector s{x, 0.0, 0.0};
    const auto st = step(m, s, Vector{x});
    const auto d = fop_step(m, s, st.preact, GradientTensor(3));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t o = 0; o < 3; ++o) EXPECT_EQ(d(i, j, o), (i == 0 && j == 2 && o == 2) ? x : 0.0);
    const auto fd = test::fd_state_jacobian(m, Vector{x});
    EXPECT_NEAR(fd(0, 2, 2), x, 1e-9);
}

TEST(FopStep, DeadReluKillsEverything) {
    std::mt19937_64 rng(4);
    const NetworkShape shape(3, 3, 2, 3);
    const auto m = random_model(shape, full_mask(shape), Activation::relu, rng);
    const Vector s = random_vector(shape.total(), rng);
    const Vector negative(shape.total(), -1.0);
    const auto d = fop_step(m, s, negative, random_tensor(shape.total(), rng));
    EXPECT_TRUE(d.all_zero());
}

TEST(FopStep, DimensionMismatch) {
    const auto m = test::single_edge_model(1.0, Activation::identity, true);
    EXPECT_THROW(fop_step(m, Vector(3), Vector(2), GradientTensor(3)), DimensionError);
    EXPECT_THROW(fop_step(m, Vector(3), Vector(3), GradientTensor(4)), DimensionError);
}

TEST(ForwardWithGrad, SingleTickIsZero) {
    std::mt19937_64 rng(5);
    const NetworkShape shape(3, 2, 2, 1);
    const auto m = random_model(shape, full_mask(shape), Activation::tanh, rng);
    const auto r = forward_with_grad(m, Vector{0.2, 0.4});
    EXPECT_TRUE(r.gradient.all_zero());
    EXPECT_EQ(r.trace.states.size(), 1u);
}

TEST(ForwardWithGrad, ZeroWeightReluIsZero) {
    const NetworkShape shape(3, 5, 2, 5);
    const auto m = build_model(shape, mesh_mask(shape), Init::zero, 0);
    EXPECT_TRUE(forward_with_grad(m, Vector{1.0, -2.0}).gradient.all_zero());
}

TEST(ForwardWithGrad, TraceMatchesForward) {
    std::mt19937_64 rng(6);
    const NetworkShape shape(3, 4, 2, 4);
    const auto m = random_model(shape, mesh_mask(shape), Activation::tanh, rng);
    const auto x = random_vector(2, rng);
    const auto r = forward_with_grad(m, x);
    const auto f = forward(m, x);
    EXPECT_EQ(r.trace.states, f.states);
    EXPECT_EQ(r.trace.preacts, f.preacts);
    EXPECT_EQ(r.gradient.tick(), 3u);
}

TEST(ForwardWithGrad, MatchesFiniteDifferenceJacobian) {
    std::mt19937_64 rng(7);
    for (bool clamp : {true, false}) {
        const NetworkShape shape(2, 2, 2, 4);  // N = 6
        const auto m = random_model(shape, full_mask(shape), Activation::tanh, rng, clamp);
        const auto x = random_vector(1, rng);
        const auto d = forward_with_grad(m, x).gradient;
        const auto fd = test::fd_state_jacobian(m, x);
        double worst = 0.0;
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j)
                for (std::size_t o = 0; o < 6; ++o) worst = std::max(worst, rel_err(d(i, j, o), fd(i, j, o)));
        EXPECT_LE(worst, 1e-6) << "clamp=" << clamp;
    }
}

TEST(ForwardWithGrad, ClampedInputSlicesAreZero) {
    std::mt19937_64 rng(8);
    const NetworkShape shape(4, 3, 2, 5);
    const auto m = random_model(shape, full_mask(shape), Activation::sigmoid, rng);
    const auto d = forward_with_grad(m, random_vector(3, rng)).gradient;
    for (std::size_t i = 0; i < shape.total(); ++i)
        for (std::size_t j = 0; j < shape.total(); ++j)
            for (std::size_t o = 0; o < shape.inputs(); ++o) EXPECT_EQ(d(i, j, o), 0.0);
}

TEST(ForwardWithGrad, MemoryIsTwoTensorsRegardlessOfTicks) {
    std::mt19937_64 rng(9);
    const std::size_t tensor_bytes = 10 * 10 * 10 * sizeof(double);
    for (std::size_t ticks : {3u, 30u}) {
        const NetworkShape shape(3, 5, 2, ticks);
        const auto m = random_model(shape, mesh_mask(shape), Activation::tanh, rng);
        const auto x = random_vector(2, rng);
        const std::size_t base = TensorMemoryStats::live_bytes.load();
        TensorMemoryStats::reset_peak();
        {
            const auto r = forward_with_grad(m, x);
            EXPECT_EQ(r.gradient.size(), 10u);
        }
        EXPECT_EQ(TensorMemoryStats::peak_bytes.load() - base, 2 * tensor_bytes) << "ticks=" << ticks;
        EXPECT_EQ(TensorMemoryStats::allocations.load(), 2u);
        EXPECT_EQ(TensorMemoryStats::live_bytes.load(), base);
    }
}

TEST(ErrorGradient, ZeroAndSingleOutput) {
    std::mt19937_64 rng(10);
    const NetworkShape shape(2, 1, 1, 3);
    const auto m = random_model(shape, full_mask(shape), Activation::tanh, rng);
    const auto d = random_tensor(4, rng);
    const auto g0 = error_gradient(Vector{0.0}, d, m);
    for (double v : g0.flat()) EXPECT_EQ(v, 0.0);
    const auto g = error_gradient(Vector{-2.5}, d, m);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(g(i, j), m.mask()(i, j) ? -2.5 * d(i, j, 3) : 0.0);
}

TEST(ErrorGradient, MatchesBruteForce) {
    std::mt19937_64 rng(11);
    const NetworkShape shape(2, 0, 2, 3);  // N = 4, O = 2
    const auto m = random_model(shape, full_mask(shape), Activation::tanh, rng);
    const auto d = random_tensor(4, rng);
    const auto dedy = random_vector(2, rng);
    const auto g = error_gradient(dedy, d, m);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0.0;
            for (std::size_t o = 0; o < 2; ++o) s += dedy[o] * d(i, j, 2 + o);
            EXPECT_DOUBLE_EQ(g(i, j), m.mask()(i, j) ? s : 0.0);
        }
    EXPECT_THROW(error_gradient(Vector{1.0}, d, m), DimensionError);
}

TEST(ErrorGradientProperty, AgreesWithFiniteDifferences) {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 40; ++rep) {
        const auto act = std::array{Activation::identity, Activation::tanh, Activation::sigmoid}[rep % 3];
        const std::size_t n = act == Activation::identity ? 3 + rep % 4 : 3 + rep % 10;
        const auto c = random_check_case(n, 1 + rep % 5, act, 1000 + rep);
        const auto r = forward_with_grad(c.model, c.input);
        const auto head = softmax_cross_entropy(readout(r.trace, c.model.shape()), c.label);
        const auto g = error_gradient(head.dedy, r.gradient, c.model);
        const auto g_fd = finite_diff_gradient(c.model, c.input, c.label);
        EXPECT_TRUE(compare(g, g_fd, 1e-5).pass) << to_text(compare(g, g_fd, 1e-5));
    }
}

TEST(ErrorGradientProperty, ReluAwayFromKinks) {
    for (int rep = 0; rep < 20; ++rep) {
        const auto c = random_check_case(4 + rep % 8, 2 + rep % 4, Activation::relu, 2000 + rep);
        const auto r = forward_with_grad(c.model, c.input);
        const auto head = softmax_cross_entropy(readout(r.trace, c.model.shape()), c.label);
        const auto g = error_gradient(head.dedy, r.gradient, c.model);
        EXPECT_TRUE(compare(g, finite_diff_gradient(c.model, c.input, c.label), 1e-5).pass);
    }
}
