#pragma once

#include "pclab/param.hpp"

#include <vector>

namespace pclab {

/// Closed-form equilibrium of PC inference on a linear network with squared
/// loss. Per-layer vectors are indexed by layer (index 0 unused; v_star[0] = x).
struct FixedPointSolution {
    std::vector<Matrix> e_star;  // l = 1..L
    std::vector<Matrix> v_star;  // l = 0..L; v_star[L] = W_L v*_{L-1} + e*_L
    Matrix c_gamma;              // M_L × M_L
    Matrix residual;             // y − f at the forward pass
};

/// W_{j:i} = W_j W_{j-1} ... W_i (identity of size M_{i-1} when j < i).
Matrix suffix_product(const Mlp& net, std::size_t j, std::size_t i);

/// C_γ = Σ_{i=2}^{L} (γ_L/γ_{i-1}) W_{L:i} W_{L:i}ᵀ with γ_l at index l-1.
Matrix c_gamma(const Mlp& net, const std::vector<double>& gammas);

FixedPointSolution fixed_point(const Mlp& net, const Matrix& x, const Matrix& y, const std::vector<double>& gammas);

/// Equilibrium of the nudged free energy β·ℒ(y, v_L) + Σ_{l≤L} γ_l/2 ‖e_l‖².
FixedPointSolution nudged_fixed_point(const Mlp& net, const Matrix& x, const Matrix& y,
                                      const std::vector<double>& gammas, double beta);

/// Largest absolute entry of ∂F/∂v_l over l = 1..L-1 (and L when nudged),
/// evaluated at the given states; zero at an exact equilibrium.
double stationarity_residual(const Mlp& net, const FixedPointSolution& sol, const Matrix& y,
                             const std::vector<double>& gammas, double beta = 0.0);

struct LayerSimilarity {
    std::size_t layer;
    double cos_pc_bp;
    double cos_pc_gnt;
    double cos_bp_gnt;
};

/// Cosine similarities between the per-layer error signals of PC at its
/// fixed point (−e*_l), backpropagation (δ_l) and damped Gauss-Newton
/// targets. Because every layer's weight update is its error signal times a
/// layer input shared by all three methods, the comparison is made on the
/// error signals.
std::vector<LayerSimilarity> gradient_similarity_panel(const Mlp& net, const Matrix& x, const Matrix& y,
                                                       const std::vector<double>& gammas, double rho);

/// Cosine between the PC fixed-point weight gradient −e*_l v*_{l-1}ᵀ and the
/// backprop weight gradient δ_l h_{l-1}ᵀ, per layer (index l-1).
std::vector<double> weight_gradient_cosines(const Mlp& net, const Matrix& x, const Matrix& y,
                                            const std::vector<double>& gammas);

struct ScalingFit {
    double slope;          // mean over seeds of the per-seed log-log slope
    double slope_spread;   // max − min of the per-seed slopes
    std::vector<double> mean_log_value;  // mean log value per width
};

/// Log-log slope of ‖C_γ‖_RMS against the hidden width for linear networks
/// of the given depth and output dimension, initialized under `spec`.
ScalingFit c_gamma_scaling_exponent(const AbcSpec& spec, const std::vector<std::size_t>& widths,
                                    const std::vector<std::uint64_t>& seeds, std::size_t input_dim,
                                    std::size_t output_dim, double gamma_prime = 1.0);

struct BalanceSlopes {
    std::size_t layer;
    double slope_one_sweep;
    double slope_fixed_point;
};

/// Width exponents of ‖e_{l,1}‖_RMS (one F-ini sequential sweep) and ‖e*_l‖_RMS
/// per hidden layer, averaged over seeds. `spec.gamma_bar` may be edited to
/// inject a non-zero hidden exponent.
std::vector<BalanceSlopes> balance_exponent_check(const AbcSpec& spec, const std::vector<std::size_t>& widths,
                                                  const std::vector<std::uint64_t>& seeds, std::size_t input_dim,
                                                  std::size_t output_dim, std::size_t batch,
                                                  double gamma_prime = 1.0);

}  // namespace pclab
