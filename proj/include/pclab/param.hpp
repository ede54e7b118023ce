#pragma once

#include "pclab/model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pclab {

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Preset { sp, ntk_pc, mup_sgd, mup_gnt, mup_pc, mup_tp, mup_adam_pc };

Preset parse_preset(std::string_view name);
std::string to_string(Preset p);

/// Per-layer width exponents. Index l-1 holds layer l. Layer 1 is the input
/// layer (fan-in D, fixed), layers 2..L-1 are hidden, layer L is the readout.
/// The weight multiplier exponent a_l is 0 for every layer.
struct AbcSpec {
    std::string name;
    std::vector<double> a, b, c;
    std::vector<double> gamma_bar;  // inference step-size exponents
    std::vector<double> mu_bar;     // feedback ridge exponents
    std::vector<double> tau_bar;    // feedback learning-rate exponents
    std::size_t base_width = 128;

    std::size_t depth() const noexcept { return b.size(); }
    /// Throws ConfigError unless a_1+b_1 = 0, a_h+b_h = 1/2, a_L+b_L ≥ 1/2.
    void check_stability() const;
};

/// Expands a named preset for a network of the given depth (≥ 2).
/// gamma_bar_L must be ≤ 0.
AbcSpec preset(Preset name, std::size_t depth, double gamma_bar_L = 0.0, std::size_t base_width = 128);
AbcSpec preset(std::string_view name, std::size_t depth, double gamma_bar_L = 0.0, std::size_t base_width = 128);

/// σ′·(M/M′)^{-b_l}; layer 1 returns σ′·D^{-b_1} with the fixed input dimension D.
double effective_init_std(const AbcSpec& spec, std::size_t layer, std::size_t width, double sigma_prime,
                          std::size_t input_dim = 1);
/// η′·(M/M′)^{-c_l}
double effective_lr(const AbcSpec& spec, std::size_t layer, std::size_t width, double eta_prime);
/// γ′·(M/M′)^{-γ̄_l}
double effective_gamma(const AbcSpec& spec, std::size_t layer, std::size_t width, double gamma_prime);
/// Step sizes γ_1..γ_L at index l-1.
std::vector<double> effective_gammas(const AbcSpec& spec, std::size_t width, double gamma_prime);

struct FeedbackScales {
    double tau;
    double mu;
};
/// τ′·(M/M′)^{-τ̄_l} and μ′·(M/M′)^{-μ̄_l}.
FeedbackScales effective_feedback_scales(const AbcSpec& spec, std::size_t layer, std::size_t width,
                                         double tau_prime, double mu_prime);

/// Draws W_l ~ N(0, s_l²) with s_l = effective_init_std at base std
/// gain/sqrt(fan-in at base width): D for layer 1, M′ for the others. At M = M′
/// this is fan-in initialization for every preset.
void initialize(Mlp& net, const AbcSpec& spec, std::size_t width, double gain, Rng& rng);

/// Builds an MLP with widths [D, M, ..., M, M_L] and initializes it.
Mlp make_mlp(std::size_t input_dim, std::size_t width, std::size_t output_dim, std::size_t depth,
             Activation activation, const AbcSpec& spec, double gain, Rng& rng);

}  // namespace pclab
