#include "pclab/tp.hpp"

#include <algorithm>
#include <cmath>

namespace pclab {

TpVariant parse_tp_variant(std::string_view name)
{
    if (name == "tp") return TpVariant::tp;
    if (name == "dtp") return TpVariant::dtp;
    throw ConfigError("unknown tp variant '" + std::string(name) + "'");
}

std::string to_string(TpVariant v) { return v == TpVariant::tp ? "tp" : "dtp"; }

FeedbackMode parse_feedback_mode(std::string_view name)
{
    if (name == "analytic") return FeedbackMode::analytic;
    if (name == "trained") return FeedbackMode::trained;
    throw ConfigError("unknown feedback mode '" + std::string(name) + "'");
}

std::string to_string(FeedbackMode m) { return m == FeedbackMode::analytic ? "analytic" : "trained"; }

void TpConfig::validate() const
{
    if (!(eta_hat > 0.0))
        throw ConfigError("tp.eta_hat must be positive");
    if (feedback_mode == FeedbackMode::analytic && feedback_activation != Activation::identity)
        throw ConfigError("analytic feedback requires an identity feedback activation");
    if (!(mu_prime >= 0.0))
        throw ConfigError("tp.mu_prime must be non-negative");
    if (!(tau_prime >= 0.0))
        throw ConfigError("tp.tau_prime must be non-negative");
    if (!(weight_decay >= 0.0))
        throw ConfigError("tp.weight_decay must be non-negative");
}

double TpConfig::effective_noise_std() const noexcept
{
    if (noise_std >= 0.0)
        return noise_std;
    return feedback_mode == FeedbackMode::trained ? 0.1 : 0.0;
}

FeedbackNet make_feedback(const Mlp& net, Activation psi, double gain, Rng& rng)
{
    net.validate();
    FeedbackNet fb;
    fb.psi = psi;
    fb.Q.resize(net.depth() + 1);
    for (std::size_t l = 2; l <= net.depth(); ++l) {
        const double std = gain / static_cast<double>(std::max(net.widths[l], net.widths[l - 1]));
        fb.Q[l] = gaussian_matrix(rng, net.widths[l - 1], net.widths[l], std);
    }
    return fb;
}

Matrix q_star(const Matrix& h_prev, const Matrix& h, double mu)
{
    if (h_prev.cols() != h.cols())
        throw DimensionError("q_star: activations have different batch sizes");
    if (!(mu >= 0.0))
        throw Error("q_star: ridge must be non-negative");
    const std::size_t m = h.rows();
    const std::size_t n = h.cols();
    try {
        if (m <= n) {
            // h_prev hᵀ (h hᵀ + μI)⁻¹, an m × m solve
            Matrix gram = matmul_nt(h, h);
            for (std::size_t i = 0; i < m; ++i)
                gram(i, i) += mu;
            return solve_spd(gram, matmul_nt(h, h_prev)).transpose();
        }
        Matrix gram = matmul_tn(h, h);
        for (std::size_t i = 0; i < n; ++i)
            gram(i, i) += mu;
        return matmul(h_prev, solve_spd(gram, h.transpose()));
    } catch (const NotPositiveDefiniteError&) {
        throw NotPositiveDefiniteError("q_star: singular Gram matrix; use a positive ridge");
    }
}

namespace {

Activation layer_activation(const Mlp& net, std::size_t layer)
{
    return layer == net.depth() ? Activation::identity : net.activation;
}

void require_feedback_layer(const Mlp& net, std::size_t layer)
{
    if (layer < 2 || layer > net.depth())
        throw DimensionError("feedback layers are 2..L");
}

}  // namespace

double reconstruction_loss(const Matrix& q, const Mlp& net, std::size_t layer, const Matrix& input, Activation psi,
                           double weight_decay)
{
    require_feedback_layer(net, layer);
    const Matrix b = activate(layer_activation(net, layer), matmul(net.W(layer), input));
    const Matrix r = activate(psi, matmul(q, b)) - input;
    const double nr = frobenius_norm(r);
    const double nq = frobenius_norm(q);
    return nr * nr / (2.0 * static_cast<double>(input.rows())) + 0.5 * weight_decay * nq * nq;
}

Matrix reconstruction_gradient(const Matrix& q, const Mlp& net, std::size_t layer, const Matrix& input,
                               Activation psi, double weight_decay)
{
    require_feedback_layer(net, layer);
    const Matrix b = activate(layer_activation(net, layer), matmul(net.W(layer), input));
    const Matrix z = matmul(q, b);
    Matrix r = activate(psi, z) - input;
    if (psi != Activation::identity)
        r = hadamard(std::move(r), activate_derivative(psi, z));
    Matrix g = matmul_nt(r, b);
    g *= 1.0 / static_cast<double>(input.rows());
    g.add_scaled(q, weight_decay);
    return g;
}

void reconstruction_step(FeedbackNet& fb, const Mlp& net, const ForwardCache& cache, std::size_t layer,
                         const TpConfig& cfg, double tau, Rng& rng)
{
    require_feedback_layer(net, layer);
    Matrix input = cache.h[layer - 1];
    const double noise = cfg.effective_noise_std();
    if (noise > 0.0)
        input += gaussian_matrix(rng, input.rows(), input.cols(), noise);
    const Matrix g = reconstruction_gradient(fb.Q[layer], net, layer, input, fb.psi, cfg.weight_decay);
    fb.Q[layer].add_scaled(g, -tau);
    if (!fb.Q[layer].all_finite())
        throw DivergenceError("feedback training diverged at layer " + std::to_string(layer));
}

void set_analytic_feedback(FeedbackNet& fb, const ForwardCache& cache, const std::vector<double>& mu)
{
    const std::size_t L = cache.h.size() - 1;
    fb.Q.resize(L + 1);
    for (std::size_t l = 2; l <= L; ++l)
        fb.Q[l] = q_star(cache.h[l - 1], cache.h[l], mu.at(l));
}

Targets propagate_targets(const FeedbackNet& fb, const ForwardCache& cache, const Matrix& y, Loss loss,
                          const TpConfig& cfg)
{
    const std::size_t L = cache.h.size() - 1;
    if (fb.Q.size() != L + 1)
        throw DimensionError("propagate_targets: feedback depth mismatch");
    Targets t;
    t.target.resize(L + 1);
    t.error.resize(L + 1);
    t.target[L] = cache.h[L];
    t.target[L].add_scaled(loss_gradient(loss, cache.h[L], y), -cfg.eta_hat);
    for (std::size_t l = L - 1; l >= 1; --l) {
        const Matrix& q = fb.Q[l + 1];
        Matrix hat = activate(fb.psi, matmul(q, t.target[l + 1]));
        if (cfg.variant == TpVariant::dtp) {
            hat -= activate(fb.psi, matmul(q, cache.h[l + 1]));
            hat += cache.h[l];
        }
        t.target[l] = std::move(hat);
    }
    for (std::size_t l = 1; l <= L; ++l)
        t.error[l] = t.target[l] - cache.h[l];
    return t;
}

std::vector<Matrix> tp_gradients(const Mlp& net, const ForwardCache& cache, const Targets& targets)
{
    const std::size_t L = net.depth();
    std::vector<Matrix> g;
    for (std::size_t l = 1; l <= L; ++l) {
        Matrix local = targets.error[l] * -1.0;
        if (l < L)
            local = hadamard(std::move(local), activate_derivative(net.activation, cache.u[l]));
        g.push_back(matmul_nt(local, cache.h[l - 1]));
    }
    return g;
}

FeedbackSchedule feedback_schedule(const AbcSpec& spec, std::size_t width, const TpConfig& cfg)
{
    FeedbackSchedule s;
    s.tau.assign(spec.depth() + 1, 0.0);
    s.mu.assign(spec.depth() + 1, 0.0);
    for (std::size_t l = 2; l <= spec.depth(); ++l) {
        const FeedbackScales f = effective_feedback_scales(spec, l, width, cfg.tau_prime, cfg.mu_prime);
        s.tau[l] = f.tau;
        s.mu[l] = f.mu;
    }
    return s;
}

void pretrain_feedback(FeedbackNet& fb, const Mlp& net, const std::vector<Matrix>& batches, std::size_t epochs,
                       const TpConfig& cfg, const FeedbackSchedule& schedule, Rng& rng)
{
    for (std::size_t e = 0; e < epochs; ++e)
        for (const Matrix& x : batches) {
            const ForwardCache cache = forward(net, x);
            for (std::size_t l = 2; l <= net.depth(); ++l)
                reconstruction_step(fb, net, cache, l, cfg, schedule.tau.at(l), rng);
        }
}

TpStepResult tp_train_step(Mlp& net, FeedbackNet& fb, Optimizer& opt, const Matrix& x, const Matrix& y,
                           const TpConfig& cfg, const FeedbackSchedule& schedule, Rng& rng)
{
    cfg.validate();
    const ForwardCache before = forward(net, x);
    TpStepResult r;
    r.loss = loss_value(cfg.loss, before.output(), y);
    if (!std::isfinite(r.loss))
        throw DivergenceError("tp step: non-finite loss");

    if (cfg.feedback_mode == FeedbackMode::analytic) {
        set_analytic_feedback(fb, before, schedule.mu);
    } else {
        for (std::size_t l = 2; l <= net.depth(); ++l)
            reconstruction_step(fb, net, before, l, cfg, schedule.tau.at(l), rng);
    }
    const Targets targets = propagate_targets(fb, before, y, cfg.loss, cfg);
    opt.step(net, tp_gradients(net, before, targets));
    for (std::size_t l = 1; l <= net.depth(); ++l)
        if (!net.W(l).all_finite())
            throw DivergenceError("tp step: non-finite weights at layer " + std::to_string(l));

    const ForwardCache after = forward(net, x);
    for (std::size_t l = 1; l <= net.depth(); ++l)
        r.delta_h_rms.push_back(rms_norm(after.h[l] - before.h[l]));
    return r;
}

double omega_L(const Matrix& w_last_init, const Matrix& delta_h, std::size_t width)
{
    if (width < 2)
        throw Error("omega_L: width must be at least 2");
    const double nw = rms_norm(w_last_init);
    const double nd = rms_norm(delta_h);
    if (nw == 0.0 || nd == 0.0)
        throw ZeroNormError("omega_L: zero-norm input");
    const double ratio = rms_norm(matmul(w_last_init, delta_h)) / (nw * nd);
    if (ratio == 0.0)
        throw ZeroNormError("omega_L: W Δh vanishes");
    return std::log(ratio) / std::log(static_cast<double>(width));
}

}  // namespace pclab
