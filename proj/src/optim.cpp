#include "pclab/optim.hpp"

#include <cmath>

namespace pclab {

OptimizerKind parse_optimizer(std::string_view name)
{
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "sgd_momentum" || name == "momentum") return OptimizerKind::sgd_momentum;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string to_string(OptimizerKind k)
{
    switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::adam: return "adam";
    }
    return "?";
}

Optimizer::Optimizer(OptimizerKind kind, std::vector<double> lrs) : kind_(kind), lrs_(std::move(lrs)) {}

void Optimizer::step(Mlp& net, const std::vector<Matrix>& grads)
{
    const std::size_t L = net.depth();
    if (grads.size() != L || lrs_.size() != L)
        throw DimensionError("Optimizer::step: expected one gradient and one rate per layer");
    if (kind_ != OptimizerKind::sgd && m_.empty()) {
        for (std::size_t l = 1; l <= L; ++l) {
            m_.emplace_back(net.W(l).rows(), net.W(l).cols());
            if (kind_ == OptimizerKind::adam)
                v_.emplace_back(net.W(l).rows(), net.W(l).cols());
        }
    }
    ++t_;
    constexpr double momentum = 0.9, beta1 = 0.9, beta2 = 0.99, eps = 1e-8;
    for (std::size_t i = 0; i < L; ++i) {
        Matrix& w = net.weights[i];
        const Matrix& g = grads[i];
        if (!w.same_shape(g))
            throw DimensionError("Optimizer::step: gradient shape mismatch at layer " + std::to_string(i + 1));
        const double lr = lrs_[i];
        switch (kind_) {
        case OptimizerKind::sgd:
            w.add_scaled(g, -lr);
            break;
        case OptimizerKind::sgd_momentum:
            m_[i] *= momentum;
            m_[i] += g;
            w.add_scaled(m_[i], -lr);
            break;
        case OptimizerKind::adam: {
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
            auto m = m_[i].values();
            auto v = v_[i].values();
            auto gv = g.values();
            auto wv = w.values();
            for (std::size_t k = 0; k < wv.size(); ++k) {
                m[k] = beta1 * m[k] + (1.0 - beta1) * gv[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * gv[k] * gv[k];
                wv[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
            }
            break;
        }
        }
    }
}

Optimizer make_optimizer(OptimizerKind kind, const AbcSpec& spec, std::size_t width, double eta_prime)
{
    std::vector<double> lrs;
    for (std::size_t l = 1; l <= spec.depth(); ++l)
        lrs.push_back(effective_lr(spec, l, width, eta_prime));
    return Optimizer(kind, std::move(lrs));
}

double bp_train_step(Mlp& net, Optimizer& opt, const Matrix& x, const Matrix& y, Loss loss)
{
    const ForwardCache cache = forward(net, x);
    const double value = loss_value(loss, cache.output(), y);
    if (!std::isfinite(value))
        throw DivergenceError("backprop step: non-finite loss");
    opt.step(net, bp_gradients(net, cache, y, loss));
    for (const auto& w : net.weights)
        if (!w.all_finite())
            throw DivergenceError("backprop step: non-finite weights");
    return value;
}

}  // namespace pclab
