#pragma once

#include "pclab/optim.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pclab {

enum class InferenceMode { sequential, synchronous };

InferenceMode parse_inference_mode(std::string_view name);
std::string to_string(InferenceMode m);

struct PcConfig {
    InferenceMode mode = InferenceMode::sequential;
    bool f_ini = true;
    bool fpa = false;
    bool nudged = false;
    double beta = 1.0;
    std::size_t steps = 1;
    double gamma_prime = 1.0;
    /// Interleave a weight update after every inference step.
    bool incremental = false;
    /// Multiplies every state update; 1 is the plain rule v ← v − ∂F/∂v.
    double inference_rate = 1.0;
    Loss loss = Loss::mse_sum;

    void validate() const;
};

/// Inference state for one batch. Per-layer vectors are indexed by layer:
/// v[0] = x, v[1..L-1] are the hidden states and v[L] exists only when nudged.
/// pred[l] = W_l φ(v_{l-1}) and e[l] is the local error, both for l = 1..L.
/// Under the fixed prediction assumption phi and dphi stay at their initial
/// values; otherwise they track v.
struct PcState {
    std::vector<Matrix> v;
    std::vector<Matrix> phi;   // φ(v_l), l = 0..L-1 (φ(v_0) = x)
    std::vector<Matrix> dphi;  // φ'(v_l), l = 1..L-1
    std::vector<Matrix> pred;
    std::vector<Matrix> e;
    std::vector<double> gammas;  // γ_l at index l-1

    std::size_t depth() const noexcept { return pred.size() - 1; }
    double gamma(std::size_t l) const { return gammas.at(l - 1); }
};

/// Starts inference from the forward pass (F-ini) or from i.i.d. N(0, 1) states.
PcState init_inference(const Mlp& net, const ForwardCache& cache, const Matrix& y, const PcConfig& cfg,
                       std::vector<double> gammas, Rng& rng);

/// Free energy of the state; the loss term is evaluated at pred_L (or v_L when nudged).
double free_energy(const Mlp& net, const PcState& state, const Matrix& y, const PcConfig& cfg);

/// One inference step in place. Throws DivergenceError on non-finite states.
void inference_step(const Mlp& net, PcState& state, const Matrix& y, const PcConfig& cfg);

/// Recomputes predictions and errors from the current weights and states.
void refresh(const Mlp& net, PcState& state, const Matrix& y, const PcConfig& cfg);

/// G_l = −e_l φ(v_{l-1})ᵀ at index l-1 (step sizes γ_l omitted).
std::vector<Matrix> pc_gradients(const Mlp& net, const PcState& state);

struct PcStepResult {
    double loss = 0.0;                 // ℒ(y, f) before the update
    std::vector<double> free_energy;   // F before each inference step and after the last
    std::vector<double> error_rms;     // ‖e_l‖_RMS after inference, index l-1
    std::vector<double> delta_u_rms;   // ‖u_l(after) − u_l(before)‖_RMS on the batch, index l-1
};

/// Inference followed by a weight update (or interleaved updates when incremental).
PcStepResult pc_train_step(Mlp& net, Optimizer& opt, const Matrix& x, const Matrix& y, const PcConfig& cfg,
                           const std::vector<double>& gammas, Rng& rng);

}  // namespace pclab
