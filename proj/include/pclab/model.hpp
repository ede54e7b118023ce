#pragma once

#include "pclab/linalg.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pclab {

enum class Activation { identity, tanh, relu };

Activation parse_activation(std::string_view name);
std::string to_string(Activation a);

double activate(Activation a, double x) noexcept;
/// Derivative; relu'(0) = 0.
double activate_derivative(Activation a, double x) noexcept;
Matrix activate(Activation a, Matrix x);
Matrix activate_derivative(Activation a, Matrix x);
/// Both at once; for tanh the derivative reuses the value as 1 − φ².
void activate_with_derivative(Activation a, const Matrix& x, Matrix& value, Matrix& derivative);

enum class Loss { mse_sum, cross_entropy };

Loss parse_loss(std::string_view name);
std::string to_string(Loss l);

/// Column-wise softmax.
Matrix softmax(const Matrix& f);
/// Loss summed over the batch: ½‖f − y‖² or −Σ y log softmax(f).
double loss_value(Loss loss, const Matrix& f, const Matrix& y);
/// ∂ℒ/∂f: f − y or softmax(f) − y.
Matrix loss_gradient(Loss loss, const Matrix& f, const Matrix& y);

/// Multilayer perceptron without biases. weights[l-1] holds W_l with shape
/// M_l × M_{l-1}; the activation applies to layers 1..L-1 and layer L is linear.
struct Mlp {
    std::vector<std::size_t> widths;  // M_0 .. M_L
    std::vector<Matrix> weights;
    Activation activation = Activation::tanh;

    Mlp() = default;
    /// Zero weights of the right shapes.
    Mlp(std::vector<std::size_t> widths, Activation activation);

    std::size_t depth() const noexcept { return weights.size(); }
    Matrix& W(std::size_t l) { return weights.at(l - 1); }
    const Matrix& W(std::size_t l) const { return weights.at(l - 1); }
    /// Throws DimensionError if weight shapes disagree with widths.
    void validate() const;
};

/// u[l] and h[l] for l = 0..L; u[0] is empty, h[0] = x, h[L] = u[L] = f.
struct ForwardCache {
    std::vector<Matrix> u;
    std::vector<Matrix> h;

    const Matrix& output() const { return h.back(); }
};

ForwardCache forward(const Mlp& net, const Matrix& x);

/// δ_l = ∂ℒ/∂u_l for l = 1..L, returned at index l (index 0 empty).
std::vector<Matrix> bp_deltas(const Mlp& net, const ForwardCache& cache, const Matrix& y, Loss loss);

/// ∂ℒ/∂W_l = δ_l h_{l-1}ᵀ, at index l-1.
std::vector<Matrix> bp_gradients(const Mlp& net, const ForwardCache& cache, const Matrix& y, Loss loss);

/// Damped Gauss-Newton error signals in u-space. For each sample, with the
/// Jacobian J_l = ∂u_L/∂u_l (M_L × M_l), returns J_lᵀ (J_l J_lᵀ + ρI)⁻¹ (f − y)
/// at index l (index 0 empty). The orientation matches bp_deltas, so as ρ → ∞
/// the result approaches δ_l / ρ.
std::vector<Matrix> gnt_deltas(const Mlp& net, const ForwardCache& cache, const Matrix& y, double rho);

/// Weight-space counterpart of gnt_deltas: g_l h_{l-1}ᵀ at index l-1.
std::vector<Matrix> gnt_gradients(const Mlp& net, const ForwardCache& cache, const Matrix& y, double rho);

}  // namespace pclab
