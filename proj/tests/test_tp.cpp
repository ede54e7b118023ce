#include "pclab/tp.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pclab;

namespace {

Mlp tanh_net(std::vector<std::size_t> widths, std::uint64_t seed)
{
    Mlp net(widths, Activation::tanh);
    Rng rng(seed);
    for (std::size_t l = 1; l <= net.depth(); ++l)
        net.W(l) = gaussian_matrix(rng, widths[l], widths[l - 1], 1.0 / std::sqrt(double(widths[l - 1])));
    return net;
}

}  // namespace

TEST(QStar, StationaryPointOfReconstructionLoss)
{
    const Mlp net = tanh_net({4, 6, 5, 3}, 1);
    Rng rng(2);
    const Matrix x = gaussian_matrix(rng, 4, 9, 1.0);
    const ForwardCache c = forward(net, x);
    const double lambda = 0.01;
    for (std::size_t l = 2; l <= 3; ++l) {
        const double mu = lambda * double(net.widths[l - 1]);
        const Matrix q = q_star(c.h[l - 1], c.h[l], mu);
        const Matrix g = reconstruction_gradient(q, net, l, c.h[l - 1], Activation::identity, lambda);
        EXPECT_LT(frobenius_norm(g), 1e-12) << "layer " << l;
    }
}

TEST(QStar, BothSolvePathsAgree)
{
    Rng rng(3);
    const Matrix a = gaussian_matrix(rng, 5, 4, 1.0);
    const Matrix wide = gaussian_matrix(rng, 3, 4, 1.0);  // m < n: m × m solve
    const Matrix tall = gaussian_matrix(rng, 7, 4, 1.0);  // m > n: n × n solve
    for (const Matrix* h : {&wide, &tall}) {
        const Matrix q = q_star(a, *h, 0.3);
        Matrix gram = matmul_nt(*h, *h);
        for (std::size_t i = 0; i < gram.rows(); ++i)
            gram(i, i) += 0.3;
        // normal equations Q (h hᵀ + μI) = a hᵀ
        EXPECT_LT(max_abs_diff(matmul(q, gram), matmul_nt(a, *h)), 1e-12);
    }
}

TEST(QStar, SingularWithoutRidge)
{
    const Matrix h(3, 2, 1.0);
    EXPECT_THROW(q_star(Matrix(2, 2, 1.0), h, 0.0), NotPositiveDefiniteError);
    EXPECT_THROW(q_star(Matrix(2, 2, 1.0), h, -1.0), Error);
}

TEST(Reconstruction, GradientMatchesFiniteDifferences)
{
    const Mlp net = tanh_net({4, 6, 5}, 4);
    Rng rng(5);
    const Matrix a = gaussian_matrix(rng, 6, 3, 1.0);
    for (Activation psi : {Activation::identity, Activation::tanh}) {
        const Matrix q = gaussian_matrix(rng, 6, 5, 0.3);
        const Matrix g = reconstruction_gradient(q, net, 2, a, psi, 0.1);
        for (std::size_t i = 0; i < q.rows(); ++i)
            for (std::size_t j = 0; j < q.cols(); ++j) {
                Matrix up = q, down = q;
                up(i, j) += 1e-6;
                down(i, j) -= 1e-6;
                const double fd = (reconstruction_loss(up, net, 2, a, psi, 0.1)
                                   - reconstruction_loss(down, net, 2, a, psi, 0.1))
                                  / 2e-6;
                EXPECT_NEAR(g(i, j), fd, 1e-8);
            }
    }
    EXPECT_THROW(reconstruction_loss(Matrix(4, 6), net, 1, Matrix(4, 3), Activation::identity, 0.0),
                 DimensionError);
}

TEST(Reconstruction, TrainedFeedbackConvergesToRidgeSolution)
{
    const Mlp net = tanh_net({4, 8, 6, 3}, 6);
    Rng rng(7);
    const Matrix x = gaussian_matrix(rng, 4, 16, 1.0);
    const ForwardCache c = forward(net, x);
    TpConfig cfg;
    cfg.feedback_mode = FeedbackMode::trained;
    cfg.noise_std = 0.0;
    cfg.weight_decay = 0.01;
    FeedbackNet fb = make_feedback(net, Activation::identity, 1.0, rng);
    for (int t = 0; t < 20000; ++t)
        for (std::size_t l = 2; l <= 3; ++l)
            reconstruction_step(fb, net, c, l, cfg, 0.5, rng);
    for (std::size_t l = 2; l <= 3; ++l) {
        const Matrix target = q_star(c.h[l - 1], c.h[l], cfg.weight_decay * double(net.widths[l - 1]));
        EXPECT_LT(max_abs_diff(fb.Q[l], target), 1e-4) << "layer " << l;
    }
}

TEST(Targets, OutputTargetIsGradientStep)
{
    const Mlp net = tanh_net({3, 5, 2}, 8);
    Rng rng(9);
    const Matrix x = gaussian_matrix(rng, 3, 4, 1.0);
    const Matrix y = gaussian_matrix(rng, 2, 4, 1.0);
    const ForwardCache c = forward(net, x);
    FeedbackNet fb = make_feedback(net, Activation::identity, 1.0, rng);
    TpConfig cfg;
    cfg.eta_hat = 0.1;
    const Targets t = propagate_targets(fb, c, y, Loss::mse_sum, cfg);
    EXPECT_LT(max_abs_diff(t.error[2], (c.output() - y) * -0.1), 1e-15);
    // difference correction: identical feedback of target and forward pass
    EXPECT_LT(max_abs_diff(t.error[1], matmul(fb.Q[2], t.error[2])), 1e-15);
}

TEST(Targets, InvertibleLinearNetworkFollowsGaussNewton)
{
    // Square invertible layers with exact inverses as feedback: DTP targets
    // are Gauss-Newton targets, so the update direction matches GNT.
    Mlp net({3, 3, 3}, Activation::identity);
    Rng rng(10);
    net.W(1) = gaussian_matrix(rng, 3, 3, 1.0);
    net.W(2) = gaussian_matrix(rng, 3, 3, 1.0);
    for (std::size_t i = 0; i < 3; ++i)
        net.W(2)(i, i) += 3.0;
    const Matrix x = gaussian_matrix(rng, 3, 1, 1.0);
    const Matrix y = gaussian_matrix(rng, 3, 1, 1.0);
    const ForwardCache c = forward(net, x);
    FeedbackNet fb;
    fb.Q.resize(3);
    fb.Q[2] = q_star(Matrix::identity(3), net.W(2), 0.0);
    TpConfig cfg;
    const Targets t = propagate_targets(fb, c, y, Loss::mse_sum, cfg);
    const auto tp = tp_gradients(net, c, t);
    const auto gnt = gnt_gradients(net, c, y, 1e-8);
    for (std::size_t l = 0; l < 2; ++l)
        EXPECT_GE(cosine_similarity(tp[l], gnt[l]), 0.999) << "layer " << l + 1;
}

TEST(TpTraining, AnalyticStepReducesLoss)
{
    Mlp net = tanh_net({5, 16, 16, 3}, 11);
    Rng rng(12);
    const Matrix x = gaussian_matrix(rng, 5, 8, 1.0);
    const Matrix y = gaussian_matrix(rng, 3, 8, 0.5);
    TpConfig cfg;
    cfg.eta_hat = 0.5;
    FeedbackNet fb = make_feedback(net, Activation::identity, 1.0, rng);
    const FeedbackSchedule sched = feedback_schedule(preset(Preset::mup_tp, 3, 0.0, 16), 16, cfg);
    Optimizer opt(OptimizerKind::sgd, {0.1, 0.1, 0.1});
    double first = 0.0, last = 0.0;
    for (int t = 0; t < 20; ++t) {
        const TpStepResult r = tp_train_step(net, fb, opt, x, y, cfg, sched, rng);
        (t == 0 ? first : last) = r.loss;
        ASSERT_EQ(r.delta_h_rms.size(), 3u);
    }
    EXPECT_LT(last, first);
}

TEST(TpTraining, ConfigValidation)
{
    TpConfig cfg;
    cfg.feedback_activation = Activation::tanh;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_EQ(TpConfig{}.effective_noise_std(), 0.0);
    cfg = TpConfig{};
    cfg.feedback_mode = FeedbackMode::trained;
    EXPECT_EQ(cfg.effective_noise_std(), 0.1);
}

TEST(OmegaL, AlignedUpdatesGiveOne)
{
    const Matrix w(10, 256, 1.0);
    const Matrix d(256, 4, 1.0);
    EXPECT_NEAR(omega_L(w, d, 256), 1.0, 1e-12);
}

TEST(OmegaL, IndependentUpdatesGiveOneHalf)
{
    Rng rng(13);
    const std::size_t m = 4096;
    const Matrix w = gaussian_matrix(rng, 10, m, 1.0);
    const Matrix d = gaussian_matrix(rng, m, 8, 1.0);
    EXPECT_NEAR(omega_L(w, d, m), 0.5, 0.03);
    EXPECT_THROW(omega_L(w, Matrix(m, 8), m), ZeroNormError);
}
