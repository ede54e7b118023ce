#include "pclab/param.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pclab;

namespace {

struct Expected {
    Preset preset;
    double gamma_bar_L;
    std::vector<double> b, c;
};

}  // namespace

TEST(Preset, TableForThreeLayers)
{
    const Expected cases[] = {
        {Preset::sp, 0.0, {0, 0.5, 0.5}, {0, 0, 0}},
        {Preset::mup_sgd, 0.0, {0, 0.5, 1}, {-1, 0, 1}},
        {Preset::mup_gnt, 0.0, {0, 0.5, 1}, {0, 1, 1}},
        {Preset::mup_pc, 0.0, {0, 0.5, 1}, {-1, 0, 1}},
        {Preset::mup_pc, -1.0, {0, 0.5, 1}, {0, 1, 1}},
        {Preset::mup_tp, 0.0, {0, 0.5, 0.5}, {0, 1, 1}},
        {Preset::ntk_pc, -1.0, {0, 0.5, 0.5}, {1, 2, 1}},
        {Preset::mup_adam_pc, 0.0, {0, 0.5, 1}, {0, 1, 1}},
    };
    for (const auto& e : cases) {
        const AbcSpec s = preset(e.preset, 3, e.gamma_bar_L);
        EXPECT_EQ(s.b, e.b) << s.name;
        EXPECT_EQ(s.c, e.c) << s.name;
        EXPECT_EQ(s.a, (std::vector<double>{0, 0, 0}));
        EXPECT_EQ(s.gamma_bar.back(), e.preset == Preset::sp ? 0.0 : e.gamma_bar_L);
        EXPECT_EQ(s.gamma_bar[0], 0.0);
        EXPECT_EQ(s.tau_bar.back(), -2.0 * e.b.back());
        EXPECT_EQ(s.mu_bar.back(), 2.0 * e.b.back() - 1.0);
    }
}

TEST(Preset, DeepNetworksRepeatHiddenRow)
{
    const AbcSpec s = preset("mup_pc", 5, -1.0);
    EXPECT_EQ(s.depth(), 5u);
    for (std::size_t l = 1; l < 4; ++l) {
        EXPECT_EQ(s.b[l], 0.5);
        EXPECT_EQ(s.c[l], 1.0);
    }
}

TEST(Preset, Errors)
{
    EXPECT_THROW(preset(Preset::mup_pc, 1), ConfigError);
    EXPECT_THROW(preset(Preset::mup_pc, 3, 0.5), ConfigError);
    EXPECT_THROW(preset("mup_xyz", 3), ConfigError);
}

TEST(Preset, NamesRoundTrip)
{
    for (Preset p : {Preset::sp, Preset::ntk_pc, Preset::mup_sgd, Preset::mup_gnt, Preset::mup_pc, Preset::mup_tp,
                     Preset::mup_adam_pc})
        EXPECT_EQ(parse_preset(to_string(p)), p);
}

TEST(Stability, RejectsBrokenExponents)
{
    AbcSpec s = preset(Preset::mup_pc, 3);
    s.b[1] = 0.4;
    EXPECT_THROW(s.check_stability(), ConfigError);
    s = preset(Preset::mup_pc, 3);
    s.b[2] = 0.3;
    EXPECT_THROW(s.check_stability(), ConfigError);
}

TEST(Scaling, EffectiveQuantitiesAtBaseWidthEqualPrimes)
{
    const AbcSpec s = preset(Preset::mup_pc, 3, -1.0, 128);
    for (std::size_t l = 1; l <= 3; ++l) {
        EXPECT_DOUBLE_EQ(effective_lr(s, l, 128, 0.3), 0.3);
        EXPECT_DOUBLE_EQ(effective_gamma(s, l, 128, 0.7), 0.7);
    }
}

TEST(Scaling, PowerLawsInWidth)
{
    const AbcSpec s = preset(Preset::mup_pc, 3, -1.0, 128);
    // c = (0, 1, 1): hidden and output rates shrink as 1/M
    EXPECT_DOUBLE_EQ(effective_lr(s, 1, 1024, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(effective_lr(s, 2, 1024, 1.0), 1.0 / 8.0);
    EXPECT_DOUBLE_EQ(effective_lr(s, 3, 256, 1.0), 0.5);
    // γ̄_L = −1: γ_L grows linearly
    EXPECT_EQ(effective_gammas(s, 512, 1.0), (std::vector<double>{1.0, 1.0, 4.0}));
    // init std scales as M^{-b}
    EXPECT_DOUBLE_EQ(effective_init_std(s, 3, 512, 1.0), 0.25);
    EXPECT_DOUBLE_EQ(effective_init_std(s, 2, 512, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(effective_init_std(s, 1, 512, 1.0, 784), 1.0);
    const FeedbackScales f = effective_feedback_scales(s, 3, 512, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(f.tau, 16.0);
    EXPECT_DOUBLE_EQ(f.mu, 1.0 / 4.0);
    EXPECT_THROW(effective_lr(s, 4, 128, 1.0), DimensionError);
}

TEST(Initialize, EmpiricalStdMatchesParameterization)
{
    const AbcSpec s = preset(Preset::mup_pc, 3, -1.0, 128);
    Rng rng(3);
    const Mlp net = make_mlp(64, 512, 10, 3, Activation::tanh, s, 1.0, rng);
    EXPECT_NEAR(rms_norm(net.W(1)), 1.0 / 8.0, 0.002);
    // base std 1/sqrt(128), times (512/128)^{-1/2}
    EXPECT_NEAR(rms_norm(net.W(2)), 1.0 / std::sqrt(128.0) / 2.0, 0.001);
    // times (512/128)^{-1}
    EXPECT_NEAR(rms_norm(net.W(3)), 1.0 / std::sqrt(128.0) / 4.0, 0.001);
}

TEST(Initialize, FanInAtBaseWidthForEveryPreset)
{
    for (Preset p : {Preset::sp, Preset::mup_pc, Preset::mup_tp}) {
        Rng rng(5);
        const Mlp net = make_mlp(32, 128, 10, 3, Activation::tanh, preset(p, 3), 2.0, rng);
        EXPECT_NEAR(rms_norm(net.W(2)), 2.0 / std::sqrt(128.0), 0.01);
        EXPECT_NEAR(rms_norm(net.W(3)), 2.0 / std::sqrt(128.0), 0.03);
    }
}

TEST(Initialize, DepthMismatch)
{
    Mlp net({3, 4, 4, 2}, Activation::tanh);
    Rng rng(1);
    EXPECT_THROW(initialize(net, preset(Preset::sp, 2), 4, 1.0, rng), ConfigError);
}
