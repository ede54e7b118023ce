#include "pclab/pc.hpp"

#include <cmath>

namespace pclab {

InferenceMode parse_inference_mode(std::string_view name)
{
    if (name == "sequential" || name == "si")
        return InferenceMode::sequential;
    if (name == "synchronous" || name == "simultaneous")
        return InferenceMode::synchronous;
    throw ConfigError("unknown inference mode '" + std::string(name) + "'");
}

std::string to_string(InferenceMode m)
{
    return m == InferenceMode::sequential ? "sequential" : "synchronous";
}

void PcConfig::validate() const
{
    if (steps < 1)
        throw ConfigError("pc.steps must be at least 1");
    if (nudged && !(beta > 0.0))
        throw ConfigError("pc.beta must be positive when nudged");
    if (!(inference_rate > 0.0))
        throw ConfigError("pc.inference_rate must be positive");
    if (!(gamma_prime >= 0.0))
        throw ConfigError("pc.gamma_prime must be non-negative");
}

namespace {

void check_finite(const Matrix& m, const char* what, std::size_t layer)
{
    if (!m.all_finite())
        throw DivergenceError(std::string("pc inference diverged: non-finite ") + what + " at layer "
                              + std::to_string(layer));
}

// e_L for the non-nudged free energy: −∂ℒ/∂u_L at the prediction.
Matrix output_error(const Matrix& pred, const Matrix& y, Loss loss)
{
    Matrix e = loss_gradient(loss, pred, y);
    e *= -1.0;
    return e;
}

void update_error(PcState& s, std::size_t l, const Matrix& y, const PcConfig& cfg)
{
    const std::size_t L = s.depth();
    if (l == L && !cfg.nudged)
        s.e[L] = output_error(s.pred[L], y, cfg.loss);
    else
        s.e[l] = s.v[l] - s.pred[l];
}

void update_activation(const Mlp& net, PcState& s, std::size_t l)
{
    activate_with_derivative(net.activation, s.v[l], s.phi[l], s.dphi[l]);
}

// −∂F/∂v_l for 1 ≤ l < L given the errors currently stored in the state.
Matrix hidden_descent(const Mlp& net, const PcState& s, std::size_t l)
{
    Matrix back = hadamard(matmul_tn(net.W(l + 1), s.e[l + 1]), s.dphi[l]);
    back *= s.gamma(l + 1);
    back.add_scaled(s.e[l], -s.gamma(l));
    return back;
}

// −∂F/∂v_L for the nudged output state.
Matrix output_descent(const PcState& s, const Matrix& y, const PcConfig& cfg)
{
    const std::size_t L = s.depth();
    Matrix d = loss_gradient(cfg.loss, s.v[L], y);
    d *= -cfg.beta;
    d.add_scaled(s.e[L], -s.gamma(L));
    return d;
}

}  // namespace

PcState init_inference(const Mlp& net, const ForwardCache& cache, const Matrix& y, const PcConfig& cfg,
                       std::vector<double> gammas, Rng& rng)
{
    cfg.validate();
    const std::size_t L = net.depth();
    if (cache.h.size() != L + 1)
        throw DimensionError("init_inference: cache depth mismatch");
    if (gammas.size() != L)
        throw DimensionError("init_inference: need one step size per layer");
    if (!cache.output().same_shape(y))
        throw DimensionError("init_inference: target shape mismatch");
    const std::size_t n = y.cols();

    PcState s;
    s.gammas = std::move(gammas);
    s.v.resize(L + 1);
    s.phi.resize(L);
    s.dphi.resize(L);
    s.pred.resize(L + 1);
    s.e.resize(L + 1);

    s.v[0] = cache.h[0];
    s.phi[0] = cache.h[0];
    for (std::size_t l = 1; l < L; ++l) {
        if (cfg.f_ini)
            s.v[l] = cache.u[l];
        else
            s.v[l] = gaussian_matrix(rng, net.widths[l], n, 1.0);
        update_activation(net, s, l);
    }
    if (cfg.nudged)
        s.v[L] = cfg.f_ini ? cache.u[L] : gaussian_matrix(rng, net.widths[L], n, 1.0);
    refresh(net, s, y, cfg);
    return s;
}

void refresh(const Mlp& net, PcState& s, const Matrix& y, const PcConfig& cfg)
{
    const std::size_t L = s.depth();
    for (std::size_t l = 1; l <= L; ++l) {
        s.pred[l] = matmul(net.W(l), s.phi[l - 1]);
        update_error(s, l, y, cfg);
    }
}

double free_energy(const Mlp& net, const PcState& s, const Matrix& y, const PcConfig& cfg)
{
    const std::size_t L = s.depth();
    if (L != net.depth())
        throw DimensionError("free_energy: state depth mismatch");
    double f = 0.0;
    for (std::size_t l = 1; l < L; ++l) {
        const double n = frobenius_norm(s.e[l]);
        f += 0.5 * s.gamma(l) * n * n;
    }
    if (cfg.nudged) {
        const double n = frobenius_norm(s.e[L]);
        f += cfg.beta * loss_value(cfg.loss, s.v[L], y) + 0.5 * s.gamma(L) * n * n;
    } else {
        f += s.gamma(L) * loss_value(cfg.loss, s.pred[L], y);
    }
    return f;
}

void inference_step(const Mlp& net, PcState& s, const Matrix& y, const PcConfig& cfg)
{
    const std::size_t L = s.depth();
    if (L != net.depth())
        throw DimensionError("inference_step: state depth mismatch");
    const double k = cfg.inference_rate;

    if (cfg.mode == InferenceMode::synchronous) {
        std::vector<Matrix> step(L + 1);
        for (std::size_t l = 1; l < L; ++l)
            step[l] = hidden_descent(net, s, l);
        if (cfg.nudged)
            step[L] = output_descent(s, y, cfg);
        for (std::size_t l = 1; l <= L; ++l) {
            if (step[l].empty())
                continue;
            s.v[l].add_scaled(step[l], k);
            check_finite(s.v[l], "state", l);
            if (l < L && !cfg.fpa)
                update_activation(net, s, l);
        }
        if (!cfg.fpa)
            refresh(net, s, y, cfg);
        else
            for (std::size_t l = 1; l <= L; ++l)
                update_error(s, l, y, cfg);
        return;
    }

    // Sequential sweep from the output down. Before v_l moves, e_{l+1} is
    // recomputed against the already-updated v_{l+1}.
    if (cfg.nudged) {
        s.v[L].add_scaled(output_descent(s, y, cfg), k);
        check_finite(s.v[L], "state", L);
    }
    for (std::size_t l = L - 1; l >= 1; --l) {
        update_error(s, l + 1, y, cfg);
        s.v[l].add_scaled(hidden_descent(net, s, l), k);
        check_finite(s.v[l], "state", l);
        if (!cfg.fpa) {
            update_activation(net, s, l);
            s.pred[l + 1] = matmul(net.W(l + 1), s.phi[l]);
        }
    }
    for (std::size_t l = 1; l <= L; ++l)
        update_error(s, l, y, cfg);
}

std::vector<Matrix> pc_gradients(const Mlp& net, const PcState& s)
{
    const std::size_t L = s.depth();
    if (L != net.depth())
        throw DimensionError("pc_gradients: state depth mismatch");
    std::vector<Matrix> g;
    for (std::size_t l = 1; l <= L; ++l) {
        Matrix gl = matmul_nt(s.e[l], s.phi[l - 1]);
        gl *= -1.0;
        g.push_back(std::move(gl));
    }
    return g;
}

PcStepResult pc_train_step(Mlp& net, Optimizer& opt, const Matrix& x, const Matrix& y, const PcConfig& cfg,
                           const std::vector<double>& gammas, Rng& rng)
{
    const ForwardCache before = forward(net, x);
    PcStepResult r;
    r.loss = loss_value(cfg.loss, before.output(), y);
    if (!std::isfinite(r.loss))
        throw DivergenceError("pc step: non-finite loss");

    PcState s = init_inference(net, before, y, cfg, gammas, rng);
    r.free_energy.reserve(cfg.steps + 1);
    for (std::size_t t = 0; t < cfg.steps; ++t) {
        r.free_energy.push_back(free_energy(net, s, y, cfg));
        inference_step(net, s, y, cfg);
        if (cfg.incremental) {
            opt.step(net, pc_gradients(net, s));
            refresh(net, s, y, cfg);
        }
    }
    r.free_energy.push_back(free_energy(net, s, y, cfg));
    for (std::size_t l = 1; l <= net.depth(); ++l)
        r.error_rms.push_back(rms_norm(s.e[l]));
    if (!cfg.incremental)
        opt.step(net, pc_gradients(net, s));
    for (std::size_t l = 1; l <= net.depth(); ++l)
        if (!net.W(l).all_finite())
            throw DivergenceError("pc step: non-finite weights at layer " + std::to_string(l));

    const ForwardCache after = forward(net, x);
    for (std::size_t l = 1; l <= net.depth(); ++l)
        r.delta_u_rms.push_back(rms_norm(after.u[l] - before.u[l]));
    return r;
}

}  // namespace pclab
