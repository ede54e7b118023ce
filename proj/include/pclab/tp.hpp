#pragma once

#include "pclab/optim.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pclab {

enum class TpVariant { tp, dtp };
enum class FeedbackMode { analytic, trained };

TpVariant parse_tp_variant(std::string_view name);
std::string to_string(TpVariant v);
FeedbackMode parse_feedback_mode(std::string_view name);
std::string to_string(FeedbackMode m);

struct TpConfig {
    TpVariant variant = TpVariant::dtp;
    double eta_hat = 0.01;
    FeedbackMode feedback_mode = FeedbackMode::analytic;
    Activation feedback_activation = Activation::identity;
    /// Reconstruction input noise σ_ε; negative selects 0.1 for trained
    /// feedback and 0 for analytic feedback.
    double noise_std = -1.0;
    double mu_prime = 1e-3;
    double tau_prime = 0.01;
    std::size_t pretrain_epochs = 5;
    double weight_decay = 1e-4;
    Loss loss = Loss::mse_sum;

    void validate() const;
    double effective_noise_std() const noexcept;
};

/// Feedback weights Q_l (M_{l-1} × M_l) for l = 2..L, stored at index l.
struct FeedbackNet {
    std::vector<Matrix> Q;
    Activation psi = Activation::identity;

    std::size_t depth() const noexcept { return Q.empty() ? 0 : Q.size() - 1; }
};

/// Feedback network shaped after `net`; Q_l has N(0, s²) entries with
/// s = gain / max(M_l, M_{l-1}).
FeedbackNet make_feedback(const Mlp& net, Activation psi, double gain, Rng& rng);

/// Ridge reconstruction minimizer h_prev (hᵀh + μI)⁻¹ hᵀ. When μ = 0 the
/// Gram matrix of the smaller side must be nonsingular.
Matrix q_star(const Matrix& h_prev, const Matrix& h, double mu);

/// ‖ψ(Q φ_l(W_l a)) − a‖² / (2 M_{l-1}) + (λ/2)‖Q‖² with a = h_{l-1} + noise.
/// φ_l is the network activation for l < L and the identity for l = L.
double reconstruction_loss(const Matrix& q, const Mlp& net, std::size_t layer, const Matrix& input, Activation psi,
                           double weight_decay);
/// Gradient of reconstruction_loss with respect to Q.
Matrix reconstruction_gradient(const Matrix& q, const Mlp& net, std::size_t layer, const Matrix& input,
                               Activation psi, double weight_decay);

/// One SGD step on the reconstruction loss of layer `layer` (2..L) with step
/// size `tau`; the input is cache.h[layer-1] plus N(0, σ_ε²) noise.
void reconstruction_step(FeedbackNet& fb, const Mlp& net, const ForwardCache& cache, std::size_t layer,
                         const TpConfig& cfg, double tau, Rng& rng);

/// Replaces every Q_l by q_star of this batch, with ridge μ_l.
void set_analytic_feedback(FeedbackNet& fb, const ForwardCache& cache, const std::vector<double>& mu);

struct Targets {
    std::vector<Matrix> target;  // ĥ_l, l = 1..L
    std::vector<Matrix> error;   // ĥ_l − h_l
};

Targets propagate_targets(const FeedbackNet& fb, const ForwardCache& cache, const Matrix& y, Loss loss,
                          const TpConfig& cfg);

/// Weight update directions (φ'(u_l) ∘ (h_l − ĥ_l)) h_{l-1}ᵀ at index l-1.
std::vector<Matrix> tp_gradients(const Mlp& net, const ForwardCache& cache, const Targets& targets);

/// Per-layer step sizes τ_l and ridges μ_l at index l (entries 0 and 1 unused).
struct FeedbackSchedule {
    std::vector<double> tau;
    std::vector<double> mu;
};
FeedbackSchedule feedback_schedule(const AbcSpec& spec, std::size_t width, const TpConfig& cfg);

struct TpStepResult {
    double loss = 0.0;                // ℒ(y, f) before the update
    std::vector<double> delta_h_rms;  // ‖h_l(after) − h_l(before)‖_RMS on the batch, index l-1
};

/// Trains only the feedback weights: `epochs` passes over `batches`, one
/// reconstruction step per layer and batch, with the feedforward net fixed.
void pretrain_feedback(FeedbackNet& fb, const Mlp& net, const std::vector<Matrix>& batches, std::size_t epochs,
                       const TpConfig& cfg, const FeedbackSchedule& schedule, Rng& rng);

/// Analytic mode recomputes Q* from this batch; trained mode takes one
/// reconstruction step per layer before propagating targets.
TpStepResult tp_train_step(Mlp& net, FeedbackNet& fb, Optimizer& opt, const Matrix& x, const Matrix& y,
                           const TpConfig& cfg, const FeedbackSchedule& schedule, Rng& rng);

/// log_M(‖W Δh‖_RMS / (‖W‖_RMS ‖Δh‖_RMS)).
double omega_L(const Matrix& w_last_init, const Matrix& delta_h, std::size_t width);

}  // namespace pclab
