#pragma once

#include "pclab/param.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pclab {

enum class OptimizerKind { sgd, sgd_momentum, adam };

OptimizerKind parse_optimizer(std::string_view name);
std::string to_string(OptimizerKind k);

/// Layer-wise optimizer over the weights of an Mlp. Learning rates are per
/// layer (index l-1) and fixed at construction. Momentum is 0.9; Adam uses
/// β = (0.9, 0.99) and ε = 1e-8. No weight decay.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, std::vector<double> lrs);

    /// W_l ← W_l − update(G_l) for every layer.
    void step(Mlp& net, const std::vector<Matrix>& grads);

    OptimizerKind kind() const noexcept { return kind_; }
    const std::vector<double>& learning_rates() const noexcept { return lrs_; }

private:
    OptimizerKind kind_;
    std::vector<double> lrs_;
    std::vector<Matrix> m_, v_;
    long t_ = 0;
};

/// Optimizer whose per-layer rates are effective_lr(spec, l, width, eta_prime).
Optimizer make_optimizer(OptimizerKind kind, const AbcSpec& spec, std::size_t width, double eta_prime);

/// One plain backpropagation step; returns the batch loss before the update.
double bp_train_step(Mlp& net, Optimizer& opt, const Matrix& x, const Matrix& y, Loss loss);

}  // namespace pclab
