#include "pclab/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pclab;

namespace {

Mlp random_mlp(std::vector<std::size_t> widths, Activation act, std::uint64_t seed)
{
    Mlp net(widths, act);
    Rng rng(seed);
    for (std::size_t l = 1; l <= net.depth(); ++l)
        net.W(l) = gaussian_matrix(rng, widths[l], widths[l - 1], 1.0 / std::sqrt(double(widths[l - 1])));
    return net;
}

// Central differences of the batch loss with respect to every weight.
std::vector<Matrix> numeric_gradients(Mlp net, const Matrix& x, const Matrix& y, Loss loss)
{
    const double h = 1e-6;
    std::vector<Matrix> g;
    for (std::size_t l = 1; l <= net.depth(); ++l) {
        Matrix gl(net.W(l).rows(), net.W(l).cols());
        for (std::size_t i = 0; i < gl.rows(); ++i)
            for (std::size_t j = 0; j < gl.cols(); ++j) {
                const double w = net.W(l)(i, j);
                net.W(l)(i, j) = w + h;
                const double up = loss_value(loss, forward(net, x).output(), y);
                net.W(l)(i, j) = w - h;
                const double down = loss_value(loss, forward(net, x).output(), y);
                net.W(l)(i, j) = w;
                gl(i, j) = (up - down) / (2 * h);
            }
        g.push_back(gl);
    }
    return g;
}

}  // namespace

TEST(Activation, ParseAndName)
{
    EXPECT_EQ(parse_activation("tanh"), Activation::tanh);
    EXPECT_EQ(parse_activation("linear"), Activation::identity);
    EXPECT_EQ(to_string(Activation::relu), "relu");
    EXPECT_THROW(parse_activation("sigmoid"), Error);
}

TEST(Activation, DerivativesMatchFiniteDifferences)
{
    for (Activation a : {Activation::identity, Activation::tanh, Activation::relu})
        for (double x : {-2.0, -0.3, 0.4, 1.7}) {
            const double h = 1e-6;
            const double fd = (activate(a, x + h) - activate(a, x - h)) / (2 * h);
            EXPECT_NEAR(activate_derivative(a, x), fd, 1e-8);
        }
    EXPECT_EQ(activate_derivative(Activation::relu, 0.0), 0.0);
}

TEST(Activation, MatrixTanhMatchesScalar)
{
    Rng rng(2);
    Matrix x = gaussian_matrix(rng, 50, 40, 3.0);
    x(0, 0) = 800.0;
    x(0, 1) = -800.0;
    x(0, 2) = 0.0;
    const Matrix t = activate(Activation::tanh, x);
    const Matrix d = activate_derivative(Activation::tanh, x);
    Matrix v, dv;
    activate_with_derivative(Activation::tanh, x, v, dv);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) {
            EXPECT_NEAR(t(i, j), std::tanh(x(i, j)), 1e-15);
            EXPECT_NEAR(d(i, j), 1.0 - std::tanh(x(i, j)) * std::tanh(x(i, j)), 1e-15);
        }
    EXPECT_EQ(v, t);
    EXPECT_EQ(t(0, 0), 1.0);
    EXPECT_EQ(t(0, 1), -1.0);
    EXPECT_EQ(t(0, 2), 0.0);
    EXPECT_LT(max_abs_diff(dv, d), 1e-15);
}

TEST(Loss, ValuesOnHandExample)
{
    const Matrix f{{1.0}, {2.0}};
    const Matrix y{{0.0}, {1.0}};
    EXPECT_DOUBLE_EQ(loss_value(Loss::mse_sum, f, y), 1.0);
    const double lse = std::log(std::exp(1.0) + std::exp(2.0));
    EXPECT_NEAR(loss_value(Loss::cross_entropy, f, y), lse - 2.0, 1e-15);
    EXPECT_THROW(loss_value(Loss::mse_sum, f, Matrix(3, 1)), DimensionError);
}

TEST(Loss, SoftmaxColumnsSumToOne)
{
    const Matrix f{{1000.0, -3.0}, {1001.0, 0.0}, {0.0, 2.0}};
    const Matrix p = softmax(f);
    for (std::size_t c = 0; c < 2; ++c)
        EXPECT_NEAR(p(0, c) + p(1, c) + p(2, c), 1.0, 1e-15);
    EXPECT_TRUE(p.all_finite());
}

TEST(Loss, GradientMatchesFiniteDifferences)
{
    Rng rng(4);
    const Matrix f = gaussian_matrix(rng, 4, 3, 1.0);
    const Matrix raw = gaussian_matrix(rng, 4, 3, 1.0);
    for (Loss loss : {Loss::mse_sum, Loss::cross_entropy}) {
        // cross-entropy targets are distributions
        const Matrix y = loss == Loss::cross_entropy ? softmax(raw) : raw;
        const Matrix g = loss_gradient(loss, f, y);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                Matrix up = f, down = f;
                up(i, j) += 1e-6;
                down(i, j) -= 1e-6;
                const double fd = (loss_value(loss, up, y) - loss_value(loss, down, y)) / 2e-6;
                EXPECT_NEAR(g(i, j), fd, 1e-7);
            }
    }
}

TEST(Mlp, ShapesAndValidation)
{
    Mlp net({3, 5, 2}, Activation::tanh);
    EXPECT_EQ(net.depth(), 2u);
    EXPECT_EQ(net.W(1).rows(), 5u);
    EXPECT_EQ(net.W(2).cols(), 5u);
    net.W(2) = Matrix(2, 4);
    EXPECT_THROW(net.validate(), DimensionError);
}

TEST(Forward, LastLayerIsLinear)
{
    const Mlp net = random_mlp({3, 4, 2}, Activation::tanh, 1);
    Rng rng(2);
    const Matrix x = gaussian_matrix(rng, 3, 5, 1.0);
    const ForwardCache c = forward(net, x);
    EXPECT_EQ(c.h[0], x);
    EXPECT_LT(max_abs_diff(c.h[1], activate(Activation::tanh, matmul(net.W(1), x))), 1e-15);
    EXPECT_EQ(c.output(), c.u[2]);
    EXPECT_LT(max_abs_diff(c.output(), matmul(net.W(2), c.h[1])), 1e-15);
}

TEST(Backprop, GradientsMatchFiniteDifferences)
{
    for (Loss loss : {Loss::mse_sum, Loss::cross_entropy}) {
        const Mlp net = random_mlp({4, 6, 5, 3}, Activation::tanh, 7);
        Rng rng(8);
        const Matrix x = gaussian_matrix(rng, 4, 5, 1.0);
        Matrix y = gaussian_matrix(rng, 3, 5, 1.0);
        if (loss == Loss::cross_entropy)
            y = softmax(y);
        const auto analytic = bp_gradients(net, forward(net, x), y, loss);
        const auto numeric = numeric_gradients(net, x, y, loss);
        for (std::size_t l = 0; l < analytic.size(); ++l)
            EXPECT_LT(relative_error(analytic[l], numeric[l]), 1e-7) << "layer " << l + 1;
    }
}

TEST(GaussNewton, OutputLayerIsDampedResidual)
{
    // J_L = I, so the output signal is (f − y) / (1 + ρ).
    const Mlp net = random_mlp({3, 4, 2}, Activation::tanh, 3);
    Rng rng(1);
    const Matrix x = gaussian_matrix(rng, 3, 4, 1.0);
    const Matrix y = gaussian_matrix(rng, 2, 4, 1.0);
    const ForwardCache c = forward(net, x);
    const double rho = 0.5;
    const auto g = gnt_deltas(net, c, y, rho);
    EXPECT_LT(max_abs_diff(g[2], (c.output() - y) * (1.0 / (1.0 + rho))), 1e-14);
}

TEST(GaussNewton, LargeDampingApproachesScaledBackprop)
{
    const Mlp net = random_mlp({3, 6, 5, 2}, Activation::tanh, 5);
    Rng rng(6);
    const Matrix x = gaussian_matrix(rng, 3, 3, 1.0);
    const Matrix y = gaussian_matrix(rng, 2, 3, 1.0);
    const ForwardCache c = forward(net, x);
    const double rho = 1e8;
    const auto g = gnt_deltas(net, c, y, rho);
    const auto d = bp_deltas(net, c, y, Loss::mse_sum);
    for (std::size_t l = 1; l <= 3; ++l)
        EXPECT_LT(relative_error(g[l] * rho, d[l]), 1e-6);
}

TEST(GaussNewton, ScalarOutputSolvesLinearizedTarget)
{
    // With one output and one sample, J g_l = (J Jᵀ/(J Jᵀ + ρ)) (f − y).
    const Mlp net = random_mlp({3, 5, 4, 1}, Activation::tanh, 9);
    Rng rng(2);
    const Matrix x = gaussian_matrix(rng, 3, 1, 1.0);
    const Matrix y{{0.7}};
    const ForwardCache c = forward(net, x);
    const double rho = 0.3;
    const auto g = gnt_deltas(net, c, y, rho);
    const auto d = bp_deltas(net, c, y, Loss::mse_sum);
    const double r = c.output()(0, 0) - 0.7;
    for (std::size_t l = 1; l <= 3; ++l) {
        // δ_l = J_lᵀ r, so J_l = δ_lᵀ / r
        const double jjt = dot(d[l], d[l]) / (r * r);
        const double predicted = dot(d[l], g[l]) / r;
        EXPECT_NEAR(predicted, jjt / (jjt + rho) * r, 1e-12);
    }
}
